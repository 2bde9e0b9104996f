//! Finite differences on the polar grid, fourth order in both directions.
//! Radial stencils are centered (rings reflected through the origin supply the
//! values below ring 0) and one-sided on the two outermost rings; angular
//! stencils are periodic. Cartesian derivatives follow from the chain rule.
//! Fourth order matters near the origin, where the chain rule divides the
//! radial truncation error by r.

use num_complex::Complex64;

use super::field::{DiskField, RealField};
use super::grid::DiskGrid;
use crate::error::{Error, Result};

fn require_resolution(grid: &DiskGrid) -> Result<()> {
    if grid.n_radial < 8 {
        return Err(Error::invalid(format!(
            "derivative stencils need n_radial >= 8, got {}",
            grid.n_radial
        )));
    }
    Ok(())
}

/// Value on ring `i` (negative rings are reflections through the origin).
#[inline]
fn ring_value(grid: &DiskGrid, v: &[Complex64], i: isize, j: usize) -> Complex64 {
    if i >= 0 {
        v[grid.index(i as usize, j)]
    } else {
        v[grid.index((-i - 1) as usize, grid.opposite(j))]
    }
}

fn radial_d1(grid: &DiskGrid, v: &[Complex64]) -> Vec<Complex64> {
    let (nr, na) = (grid.n_radial as isize, grid.n_angular);
    let h = grid.dr;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for i in 0..nr {
        for j in 0..na {
            let f = |d: isize| ring_value(grid, v, i + d, j);
            out[grid.index(i as usize, j)] = if i + 1 == nr {
                (25.0 * f(0) - 48.0 * f(-1) + 36.0 * f(-2) - 16.0 * f(-3) + 3.0 * f(-4)) / (12.0 * h)
            } else if i + 2 == nr {
                (3.0 * f(1) + 10.0 * f(0) - 18.0 * f(-1) + 6.0 * f(-2) - f(-3)) / (12.0 * h)
            } else {
                (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h)
            };
        }
    }
    out
}

fn radial_d2(grid: &DiskGrid, v: &[Complex64]) -> Vec<Complex64> {
    let (nr, na) = (grid.n_radial as isize, grid.n_angular);
    let h2 = grid.dr * grid.dr;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for i in 0..nr {
        for j in 0..na {
            let f = |d: isize| ring_value(grid, v, i + d, j);
            out[grid.index(i as usize, j)] = if i + 1 == nr {
                (45.0 * f(0) - 154.0 * f(-1) + 214.0 * f(-2) - 156.0 * f(-3) + 61.0 * f(-4) - 10.0 * f(-5))
                    / (12.0 * h2)
            } else if i + 2 == nr {
                (10.0 * f(1) - 15.0 * f(0) - 4.0 * f(-1) + 14.0 * f(-2) - 6.0 * f(-3) + f(-4)) / (12.0 * h2)
            } else {
                (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h2)
            };
        }
    }
    out
}

fn angular_d1(grid: &DiskGrid, v: &[Complex64]) -> Vec<Complex64> {
    let na = grid.n_angular;
    let h = grid.dtheta;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for i in 0..grid.n_radial {
        let row = &v[i * na..(i + 1) * na];
        for j in 0..na {
            let p1 = row[(j + 1) % na];
            let p2 = row[(j + 2) % na];
            let m1 = row[(j + na - 1) % na];
            let m2 = row[(j + na - 2) % na];
            out[i * na + j] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        }
    }
    out
}

fn angular_d2(grid: &DiskGrid, v: &[Complex64]) -> Vec<Complex64> {
    let na = grid.n_angular;
    let h2 = grid.dtheta * grid.dtheta;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for i in 0..grid.n_radial {
        let row = &v[i * na..(i + 1) * na];
        for j in 0..na {
            let p1 = row[(j + 1) % na];
            let p2 = row[(j + 2) % na];
            let m1 = row[(j + na - 1) % na];
            let m2 = row[(j + na - 2) % na];
            out[i * na + j] = (-p2 + 16.0 * p1 - 30.0 * row[j] + 16.0 * m1 - m2) / (12.0 * h2);
        }
    }
    out
}

/// Cartesian first partials (∂₁f, ∂₂f).
pub fn partials(f: &DiskField) -> Result<(DiskField, DiskField)> {
    let grid = &f.grid;
    require_resolution(grid)?;
    let fr = radial_d1(grid, &f.values);
    let ft = angular_d1(grid, &f.values);
    let mut d1 = Vec::with_capacity(grid.len());
    let mut d2 = Vec::with_capacity(grid.len());
    for (k, z) in grid.nodes.iter().enumerate() {
        let r = z.norm();
        let (c, s) = (z.re / r, z.im / r);
        d1.push(c * fr[k] - s / r * ft[k]);
        d2.push(s * fr[k] + c / r * ft[k]);
    }
    Ok((DiskField { grid: grid.clone(), values: d1 }, DiskField { grid: grid.clone(), values: d2 }))
}

/// ∂_z̄ f = ½ e^{iθ} (∂_r + (i/r) ∂_θ) f.
pub fn dbar(f: &DiskField) -> Result<DiskField> {
    let grid = &f.grid;
    require_resolution(grid)?;
    let fr = radial_d1(grid, &f.values);
    let ft = angular_d1(grid, &f.values);
    let i = Complex64::i();
    let values = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let r = z.norm();
            0.5 * (z / r) * (fr[k] + i / r * ft[k])
        })
        .collect();
    Ok(DiskField { grid: grid.clone(), values })
}

/// ∂_z f = ½ e^{-iθ} (∂_r − (i/r) ∂_θ) f.
pub fn dz(f: &DiskField) -> Result<DiskField> {
    let grid = &f.grid;
    require_resolution(grid)?;
    let fr = radial_d1(grid, &f.values);
    let ft = angular_d1(grid, &f.values);
    let i = Complex64::i();
    let values = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let r = z.norm();
            0.5 * (z.conj() / r) * (fr[k] - i / r * ft[k])
        })
        .collect();
    Ok(DiskField { grid: grid.clone(), values })
}

/// Cartesian second partials [∂₁₁f, ∂₁₂f, ∂₂₂f].
pub fn second_partials(f: &DiskField) -> Result<[DiskField; 3]> {
    let grid = &f.grid;
    require_resolution(grid)?;
    let fr = radial_d1(grid, &f.values);
    let frr = radial_d2(grid, &f.values);
    let ft = angular_d1(grid, &f.values);
    let ftt = angular_d2(grid, &f.values);
    let frt = angular_d1(grid, &fr);
    let n = grid.len();
    let (mut xx, mut xy, mut yy) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (k, z) in grid.nodes.iter().enumerate() {
        let r = z.norm();
        let (c, s) = (z.re / r, z.im / r);
        let (cc, ss, sc) = (c * c, s * s, s * c);
        let r2 = r * r;
        xx.push(cc * frr[k] + ss / r * fr[k] + ss / r2 * ftt[k] - 2.0 * sc / r * frt[k] + 2.0 * sc / r2 * ft[k]);
        yy.push(ss * frr[k] + cc / r * fr[k] + cc / r2 * ftt[k] + 2.0 * sc / r * frt[k] - 2.0 * sc / r2 * ft[k]);
        xy.push(
            sc * frr[k] - sc / r * fr[k] - sc / r2 * ftt[k] + (cc - ss) / r * frt[k]
                - (cc - ss) / r2 * ft[k],
        );
    }
    let g = grid.clone();
    Ok([
        DiskField { grid: g.clone(), values: xx },
        DiskField { grid: g.clone(), values: xy },
        DiskField { grid: g, values: yy },
    ])
}

/// Gradient of a real field.
pub fn gradient(f: &RealField) -> Result<(RealField, RealField)> {
    let (d1, d2) = partials(&f.to_complex())?;
    Ok((d1.re(), d2.re()))
}

/// Hessian [f₁₁, f₁₂, f₂₂] of a real field.
pub fn hessian(f: &RealField) -> Result<[RealField; 3]> {
    let [a, b, c] = second_partials(&f.to_complex())?;
    Ok([a.re(), b.re(), c.re()])
}
