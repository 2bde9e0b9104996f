//! Path integrals of 1-forms ω₁dx¹ + ω₂dx² over the polar grid: radial pieces
//! by piecewise quintic interpolation along diameters, angular pieces
//! spectrally along rings.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::field::RealField;
use super::grid::DiskGrid;

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
const STENCIL: usize = 6;

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (a, (&xa, &ya)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (b, &xb) in xs.iter().enumerate() {
            if a != b {
                l *= (x - xb) / (xa - xb);
            }
        }
        acc += l * ya;
    }
    acc
}

fn stencil_start(n: usize, k: usize) -> usize {
    if n <= STENCIL {
        0
    } else {
        k.saturating_sub(STENCIL / 2 - 1).min(n - STENCIL)
    }
}

/// Integral of the local quintic interpolant over [xs[k], xs[k+1]].
fn segment(xs: &[f64], ys: &[f64], k: usize) -> f64 {
    let n = xs.len();
    let s = stencil_start(n, k);
    let e = (s + STENCIL).min(n);
    let (a, b) = (xs[k], xs[k + 1]);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL3_X
        .iter()
        .zip(GL3_W)
        .map(|(&t, w)| w * lagrange(&xs[s..e], &ys[s..e], mid + half * t))
        .sum::<f64>()
        * half
}

/// Running integral of tabulated data from `xs[start]`; abscissae ascending.
pub fn cumulative_integral(xs: &[f64], ys: &[f64], start: usize) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    for k in start + 1..n {
        out[k] = out[k - 1] + segment(xs, ys, k - 1);
    }
    for k in (0..start).rev() {
        out[k] = out[k + 1] - segment(xs, ys, k);
    }
    out
}

/// Extrapolates tabulated data to `x` with the quintic through the last points.
pub fn extrapolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let s = n.saturating_sub(STENCIL);
    lagrange(&xs[s..], &ys[s..], x)
}

/// ∫₀^{θ_j} g dφ for periodic samples g_j = g(θ_j), evaluated spectrally.
pub fn periodic_cumulative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut spec: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let dt = 2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|j| {
            let t = j as f64 * dt;
            let mut acc = spec[0].re / n as f64 * t;
            for (m, c) in spec.iter().enumerate().skip(1) {
                if 2 * m == n {
                    continue;
                }
                let mi = if 2 * m < n { m as f64 } else { m as f64 - n as f64 };
                let e = (Complex64::from_polar(1.0, mi * t) - 1.0) / Complex64::new(0.0, mi);
                acc += (c / n as f64 * e).re;
            }
            acc
        })
        .collect()
}

/// A 1-form on the disk, sampled at interior nodes and optionally at the
/// boundary samples.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub w1: RealField,
    pub w2: RealField,
    pub boundary: Option<(Vec<f64>, Vec<f64>)>,
}

/// Potential of a 1-form at nodes and boundary samples, zero at the base node.
#[derive(Debug, Clone)]
pub struct Potential {
    pub interior: RealField,
    pub boundary: Vec<f64>,
}

struct Diameter {
    xs: Vec<f64>,
    ys: Vec<f64>,
    origin: usize,
}

fn diameter(grid: &DiskGrid, w1: &[f64], w2: &[f64], b1: &[f64], b2: &[f64], j: usize) -> Diameter {
    let (c, s) = (grid.angles[j].cos(), grid.angles[j].sin());
    let jo = grid.opposite(j);
    let nr = grid.n_radial;
    let mut xs = Vec::with_capacity(2 * nr + 2);
    let mut ys = Vec::with_capacity(2 * nr + 2);
    xs.push(-1.0);
    ys.push(b1[jo] * c + b2[jo] * s);
    for i in (0..nr).rev() {
        let k = grid.index(i, jo);
        xs.push(-grid.radii[i]);
        ys.push(w1[k] * c + w2[k] * s);
    }
    for i in 0..nr {
        let k = grid.index(i, j);
        xs.push(grid.radii[i]);
        ys.push(w1[k] * c + w2[k] * s);
    }
    xs.push(1.0);
    ys.push(b1[j] * c + b2[j] * s);
    Diameter { xs, ys, origin: nr + 1 }
}

fn boundary_values(form: &OneForm) -> (Vec<f64>, Vec<f64>) {
    if let Some(b) = &form.boundary {
        return b.clone();
    }
    let grid = &form.w1.grid;
    let xs: Vec<f64> = grid.radii.clone();
    let mut b1 = Vec::with_capacity(grid.n_angular);
    let mut b2 = Vec::with_capacity(grid.n_angular);
    for j in 0..grid.n_angular {
        let y1: Vec<f64> = (0..grid.n_radial).map(|i| form.w1.values[grid.index(i, j)]).collect();
        let y2: Vec<f64> = (0..grid.n_radial).map(|i| form.w2.values[grid.index(i, j)]).collect();
        b1.push(extrapolate(&xs, &y1, 1.0));
        b2.push(extrapolate(&xs, &y2, 1.0));
    }
    (b1, b2)
}

fn arc_integrand(grid: &DiskGrid, r: f64, w1: impl Fn(usize) -> f64, w2: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..grid.n_angular)
        .map(|j| {
            let t = grid.angles[j];
            r * (-w1(j) * t.sin() + w2(j) * t.cos())
        })
        .collect()
}

/// Integrates along the radial segment from the base node on θ = 0, then
/// along the circle through the target.
pub fn integrate_radial_then_angular(form: &OneForm) -> Potential {
    let grid: Arc<DiskGrid> = form.w1.grid.clone();
    let (b1, b2) = boundary_values(form);
    let na = grid.n_angular;
    let d = diameter(&grid, &form.w1.values, &form.w2.values, &b1, &b2, 0);
    let radial = cumulative_integral(&d.xs, &d.ys, d.origin);
    let mut interior = vec![0.0; grid.len()];
    for i in 0..grid.n_radial {
        let r = grid.radii[i];
        let g = arc_integrand(&grid, r, |j| form.w1.values[i * na + j], |j| form.w2.values[i * na + j]);
        let arc = periodic_cumulative(&g);
        for j in 0..na {
            interior[i * na + j] = radial[d.origin + i] + arc[j];
        }
    }
    let g = arc_integrand(&grid, 1.0, |j| b1[j], |j| b2[j]);
    let arc = periodic_cumulative(&g);
    let rb = radial[d.xs.len() - 1];
    let boundary = arc.iter().map(|a| rb + a).collect();
    Potential { interior: RealField { grid, values: interior }, boundary }
}

/// Integrates along the innermost circle first, then radially outward.
pub fn integrate_angular_then_radial(form: &OneForm) -> Potential {
    let grid: Arc<DiskGrid> = form.w1.grid.clone();
    let (b1, b2) = boundary_values(form);
    let na = grid.n_angular;
    let r0 = grid.radii[0];
    let g = arc_integrand(&grid, r0, |j| form.w1.values[j], |j| form.w2.values[j]);
    let arc0 = periodic_cumulative(&g);
    let mut interior = vec![0.0; grid.len()];
    let mut boundary = vec![0.0; na];
    for j in 0..na {
        let d = diameter(&grid, &form.w1.values, &form.w2.values, &b1, &b2, j);
        let radial = cumulative_integral(&d.xs, &d.ys, d.origin);
        for i in 0..grid.n_radial {
            interior[i * na + j] = arc0[j] + radial[d.origin + i];
        }
        boundary[j] = arc0[j] + radial[d.xs.len() - 1];
    }
    Potential { interior: RealField { grid, values: interior }, boundary }
}
