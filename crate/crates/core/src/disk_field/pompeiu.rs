//! The Pompeiu operator T f(z) = −(1/π) ∬_D f(ζ)/(ζ − z) dA.
//!
//! Each ring of the grid is expanded in its trigonometric interpolant and the
//! angular integral of every mode against the kernel is done exactly; in the
//! radial direction each ring's coefficient is frozen over its cell and the
//! resulting power of ρ is integrated in closed form, splitting the cell at the
//! target radius. The cell that contains the target node is then replaced by
//! the equal-area-disk rule, whose leading term vanishes: its exact integral
//! against a frozen f(z) is subtracted back out.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::field::{BoundaryTrace, DiskField};
use super::grid::DiskGrid;

pub struct PompeiuOperator {
    grid: Arc<DiskGrid>,
    own_cell: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PompeiuOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PompeiuOperator").field("n_radial", &self.grid.n_radial).finish()
    }
}

/// ∫_lo^hi of the m-th Fourier coefficient's kernel factor, times the ring
/// coefficient of mode `m_in` of f. With m = m_in − 1 the output mode is
/// e^{imθ}; see the module docs.
fn mode_factor(m_in: i64, r: f64, a: f64, b: f64) -> f64 {
    let m = m_in - 1;
    if m < 0 {
        let hi = b.min(r);
        let lo = a;
        if hi <= lo {
            return 0.0;
        }
        let p = (-m) as i32;
        2.0 * (hi * (hi / r).powi(p) - lo * (lo / r).powi(p)) / (1 + p) as f64
    } else {
        let lo = a.max(r);
        let hi = b;
        if hi <= lo {
            return 0.0;
        }
        match m {
            0 => -2.0 * (hi - lo),
            _ if r == 0.0 => 0.0,
            1 => -2.0 * r * (hi / lo).ln(),
            _ => {
                let q = (m - 1) as i32;
                -2.0 * r * ((r / lo).powi(q) - (r / hi).powi(q)) / q as f64
            }
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn rec(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// ∫ over the polar cell [a, b] × [−h, h] of dA / (ζ − r), target on the ray θ = 0.
fn own_cell_integral(r: f64, a: f64, b: f64, h: f64) -> Complex64 {
    let i = Complex64::i();
    let inner = move |rho: f64| -> Complex64 {
        if rho <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let ang = |phi: f64| Complex64::from_polar(1.0, phi);
        let val = if rho < r {
            let g = |phi: f64| (1.0 - rho / r * ang(phi)).ln() / i - phi;
            (g(h) - g(-h)) / r
        } else {
            let g = |phi: f64| (1.0 - r / rho * ang(-phi)).ln() / i;
            (g(h) - g(-h)) / r
        };
        rho * val
    };
    let tol = 1e-15 * (b - a);
    adaptive_simpson(&inner, a, r, tol) + adaptive_simpson(&inner, r, b, tol)
}

impl PompeiuOperator {
    pub fn new(grid: &Arc<DiskGrid>) -> Self {
        let half = 0.5 * grid.dr;
        let h = 0.5 * grid.dtheta;
        let own_cell = grid
            .radii
            .iter()
            .map(|&r| own_cell_integral(r, r - half, r + half, h))
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.n_angular);
        let ifft = planner.plan_fft_inverse(grid.n_angular);
        PompeiuOperator { grid: grid.clone(), own_cell, fft, ifft }
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.grid
    }

    fn ring_spectra(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let na = self.grid.n_angular;
        let scale = 1.0 / na as f64;
        (0..self.grid.n_radial)
            .map(|k| {
                let mut row: Vec<Complex64> = values[k * na..(k + 1) * na].to_vec();
                self.fft.process(&mut row);
                row.iter_mut().for_each(|c| *c *= scale);
                row
            })
            .collect()
    }

    /// Output mode amplitudes at radius r in FFT order; the Nyquist slot holds
    /// the pair (E₊ F, E₋ F) averaged, which is exact on grid angles.
    fn radial_sum(&self, spectra: &[Vec<Complex64>], r: f64) -> (Vec<Complex64>, Complex64, Complex64) {
        let na = self.grid.n_angular;
        let half = 0.5 * self.grid.dr;
        let nyq = na / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); na];
        let (mut nyq_plus, mut nyq_minus) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (k, spec) in spectra.iter().enumerate() {
            let rk = self.grid.radii[k];
            let (a, b) = (rk - half, rk + half);
            for m in 0..na {
                if m == nyq {
                    let ep = mode_factor(nyq as i64, r, a, b);
                    let em = mode_factor(-(nyq as i64), r, a, b);
                    nyq_plus += ep * spec[m];
                    nyq_minus += em * spec[m];
                    continue;
                }
                let m_in = if m < nyq { m as i64 } else { m as i64 - na as i64 };
                let e = mode_factor(m_in, r, a, b);
                if e != 0.0 {
                    out[m] += e * spec[m];
                }
            }
        }
        out[nyq] = 0.5 * (nyq_plus + nyq_minus);
        (out, nyq_plus, nyq_minus)
    }

    fn synthesize_ring(&self, mut modes: Vec<Complex64>) -> Vec<Complex64> {
        self.ifft.process(&mut modes);
        modes
            .iter()
            .zip(&self.grid.angles)
            .map(|(g, &t)| Complex64::from_polar(1.0, -t) * g)
            .collect()
    }

    /// T f at every interior node.
    pub fn apply(&self, f: &DiskField) -> DiskField {
        let spectra = self.ring_spectra(&f.values);
        let na = self.grid.n_angular;
        let rows: Vec<Vec<Complex64>> = (0..self.grid.n_radial)
            .into_par_iter()
            .map(|i| {
                let r = self.grid.radii[i];
                let (modes, _, _) = self.radial_sum(&spectra, r);
                let mut row = self.synthesize_ring(modes);
                let c = self.own_cell[i] / PI;
                for (j, v) in row.iter_mut().enumerate() {
                    let t = self.grid.angles[j];
                    *v += Complex64::from_polar(1.0, -t) * c * f.values[i * na + j];
                }
                row
            })
            .collect();
        DiskField { grid: self.grid.clone(), values: rows.concat() }
    }

    /// T f at the boundary samples (r = 1); no cell contains these points.
    pub fn boundary_trace(&self, f: &DiskField) -> BoundaryTrace {
        let spectra = self.ring_spectra(&f.values);
        let (modes, _, _) = self.radial_sum(&spectra, 1.0);
        BoundaryTrace { grid: self.grid.clone(), values: self.synthesize_ring(modes) }
    }

    /// T f at an arbitrary point of the closed disk by product integration.
    pub fn eval_at(&self, f: &DiskField, z: Complex64) -> Complex64 {
        let spectra = self.ring_spectra(&f.values);
        let r = z.norm();
        let t = if r > 0.0 { z.arg() } else { 0.0 };
        let (modes, np, nm) = self.radial_sum(&spectra, r);
        let na = self.grid.n_angular;
        let nyq = na / 2;
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, g) in modes.iter().enumerate() {
            if m == nyq {
                continue;
            }
            let m_in = if m < nyq { m as f64 } else { m as f64 - na as f64 };
            acc += g * Complex64::from_polar(1.0, m_in * t);
        }
        // cos(Nφ/2) input splits evenly between the ±N/2 exponentials
        acc += 0.5 * (np * Complex64::from_polar(1.0, nyq as f64 * t) + nm * Complex64::from_polar(1.0, -(nyq as f64) * t));
        Complex64::from_polar(1.0, -t) * acc
    }
}

pub fn t_operator(f: &DiskField) -> DiskField {
    PompeiuOperator::new(&f.grid).apply(f)
}
