use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::disk_field::RealField;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::surface_patch::{point_geometry, Jet, PointGeometry, SurfacePatch};

/// Coefficients of the linearized K-preservation condition at every node:
///
/// δK = D·(∂₁ȧ¹ + ∂₂ȧ² + q₁ȧ¹ + q₂ȧ² − q₀ċ + s₁(∂₁ȧ¹ − ∂₂ȧ²) + s₂(∂₁ȧ² + ∂₂ȧ¹))
///
/// for rates obeying the linear G-condition b_ij ȧ^j + ∂_i ċ = 0. The s-terms
/// vanish in conjugate isothermal coordinates and form the remainder P₀.
#[derive(Debug, Clone)]
pub struct KCoefficients {
    pub d: RealField,
    pub q1: RealField,
    pub q2: RealField,
    pub q0: RealField,
    pub s1: RealField,
    pub s2: RealField,
    /// Largest relative least-squares residual of the per-node fit.
    pub fit_residual: f64,
}

const FD_STEP: f64 = 1e-3;
const EPS: f64 = 1e-4;
const FIT_TOL: f64 = 1e-5;
const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Scalar probe c with its gradient, in offsets (X, Y) from the node.
pub type Probe = dyn Fn(f64, f64) -> (f64, [f64; 2]) + Sync;

/// Geometry on the 5×5 finite-difference stencil around x0.
pub struct Stencil {
    h: f64,
    geo: Vec<PointGeometry>,
    pub center: Jet,
}

impl Stencil {
    pub fn new(patch: &SurfacePatch, x1: f64, x2: f64) -> Result<Stencil> {
        let h = FD_STEP;
        let mut geo = Vec::with_capacity(25);
        for p in -2..=2 {
            for q in -2..=2 {
                let jet = patch.immersion.jet(x1 + p as f64 * h, x2 + q as f64 * h);
                geo.push(point_geometry(&patch.metric, &jet, patch.orientation)?);
            }
        }
        Ok(Stencil { h, geo, center: patch.immersion.jet(x1, x2) })
    }

    fn at(&self, p: usize, q: usize) -> &PointGeometry {
        &self.geo[p * 5 + q]
    }

    pub fn center_geometry(&self) -> &PointGeometry {
        self.at(2, 2)
    }

    /// Jet of z = a^j y_{,j} + c n with a = −b⁻¹∇c, and the rate features
    /// [div a, ∂₁a¹ − ∂₂a², ∂₁a² + ∂₂a¹, a¹, a², c] at the center.
    pub fn g_compatible(&self, probe: &Probe) -> (Jet, [f64; 6]) {
        let h = self.h;
        let mut zs = [[nalgebra::Vector3::zeros(); 5]; 5];
        let mut as_ = [[[0.0; 2]; 5]; 5];
        let mut c0 = 0.0;
        for p in 0..5 {
            for q in 0..5 {
                let g = self.at(p, q);
                let (c, grad) = probe((p as f64 - 2.0) * h, (q as f64 - 2.0) * h);
                let binv = g.b.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros);
                let a = -(binv * nalgebra::Vector2::new(grad[0], grad[1]));
                zs[p][q] = g.y1 * a[0] + g.y2 * a[1] + g.n * c;
                as_[p][q] = [a[0], a[1]];
                if p == 2 && q == 2 {
                    c0 = c;
                }
            }
        }
        let sum1 = |f: &dyn Fn(usize) -> nalgebra::Vector3<f64>, w: &[f64; 5], s: f64| -> nalgebra::Vector3<f64> {
            (0..5).fold(nalgebra::Vector3::zeros(), |acc, k| acc + f(k) * (w[k] * s))
        };
        let d1 = sum1(&|p| zs[p][2], &D1, 1.0 / h);
        let d2 = sum1(&|q| zs[2][q], &D1, 1.0 / h);
        let d11 = sum1(&|p| zs[p][2], &D2, 1.0 / (h * h));
        let d22 = sum1(&|q| zs[2][q], &D2, 1.0 / (h * h));
        let mut d12 = nalgebra::Vector3::zeros();
        for p in 0..5 {
            for q in 0..5 {
                d12 += zs[p][q] * (D1[p] * D1[q] / (h * h));
            }
        }
        let da = |comp: usize, dir: usize| -> f64 {
            (0..5).map(|k| D1[k] / h * if dir == 0 { as_[k][2][comp] } else { as_[2][k][comp] }).sum()
        };
        let (a11, a12, a21, a22) = (da(0, 0), da(1, 0), da(0, 1), da(1, 1));
        let a = as_[2][2];
        let jet = Jet { y: zs[2][2], d1, d2, d11, d12, d22 };
        (jet, [a11 + a22, a11 - a22, a12 + a21, a[0], a[1], c0])
    }

    /// Gateaux derivative of K in the direction of a displacement jet,
    /// central differences in ε with one Richardson step.
    pub fn delta_k(&self, patch: &SurfacePatch, dz: &Jet) -> Result<f64> {
        let k = |e: f64| -> Result<f64> {
            Ok(point_geometry(&patch.metric, &self.center.add(&dz.scale(e)), patch.orientation)?.k)
        };
        let d = |e: f64| -> Result<f64> { Ok((k(e)? - k(-e)?) / (2.0 * e)) };
        Ok((4.0 * d(EPS / 2.0)? - d(EPS)?) / 3.0)
    }
}

fn probes() -> Vec<Box<Probe>> {
    vec![
        Box::new(|_, _| (1.0, [0.0, 0.0])),
        Box::new(|x, _| (x, [1.0, 0.0])),
        Box::new(|_, y| (y, [0.0, 1.0])),
        Box::new(|x, _| (x * x, [2.0 * x, 0.0])),
        Box::new(|x, y| (x * y, [y, x])),
        Box::new(|_, y| (y * y, [0.0, 2.0 * y])),
        Box::new(|x, _| (x * x * x, [3.0 * x * x, 0.0])),
        Box::new(|x, y| (x * x * y, [2.0 * x * y, x * x])),
        Box::new(|x, y| (x * y * y, [y * y, 2.0 * x * y])),
        Box::new(|_, y| (y * y * y, [0.0, 3.0 * y * y])),
    ]
}

fn fit_node(patch: &SurfacePatch, x1: f64, x2: f64, probes: &[Box<Probe>]) -> Result<([f64; 6], f64)> {
    let st = Stencil::new(patch, x1, x2)?;
    let mut f = DMatrix::zeros(probes.len(), 6);
    let mut rhs = DVector::zeros(probes.len());
    for (r, probe) in probes.iter().enumerate() {
        let (jet, feat) = st.g_compatible(probe.as_ref());
        for (c, v) in feat.iter().enumerate() {
            f[(r, c)] = *v;
        }
        rhs[r] = st.delta_k(patch, &jet)?;
    }
    let coef = lstsq(&f, &rhs, 1e-12)?;
    let resid = (&f * &coef - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    let d = coef[0];
    if !(d.abs() > 1e-10 * rhs.amax()) {
        return Err(Error::solver("linearization inconsistent with divergence normal form: no divergence term"));
    }
    Ok(([d, coef[1] / d, coef[2] / d, coef[3] / d, coef[4] / d, -coef[5] / d], resid))
}

/// Coefficients of the linearized Δ(K) = 0 condition by numerical Gateaux
/// differentiation of the curvature pipeline at every node.
pub fn linearize_k(patch: &SurfacePatch) -> Result<KCoefficients> {
    let probes = probes();
    let fits: Vec<([f64; 6], f64)> = patch
        .grid
        .nodes
        .par_iter()
        .map(|z| fit_node(patch, z.re, z.im, &probes))
        .collect::<Result<_>>()?;
    let fit_residual = fits.iter().map(|f| f.1).fold(0.0, f64::max);
    if fit_residual > FIT_TOL {
        return Err(Error::solver(format!(
            "linearization inconsistent with divergence normal form: fit residual {fit_residual:.3e}"
        )));
    }
    let field = |i: usize| RealField { grid: patch.grid.clone(), values: fits.iter().map(|f| f.0[i]).collect() };
    Ok(KCoefficients {
        d: field(0),
        s1: field(1),
        s2: field(2),
        q1: field(3),
        q2: field(4),
        q0: field(5),
        fit_residual,
    })
}
