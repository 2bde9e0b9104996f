use num_complex::Complex64;

use super::provider::{CoefficientProvider, ProviderTerms};
use crate::deformation_flow::ChartState;
use crate::disk_field::{gradient, BoundaryTrace, DiskField, RealField};
use crate::error::{Error, Result};
use crate::surface_patch::SurfacePatch;

/// Coefficients of ∂_z̄u + Au + Bū + E(u) = Ψ̇ for the conjugate rate
/// u = ȧ¹ − iȧ², whose ∂_z̄ carries the divergence and the curl of ȧ.
#[derive(Debug, Clone)]
pub struct SystemCoefficients {
    pub p1: RealField,
    pub p2: RealField,
    pub q1: RealField,
    pub q2: RealField,
    pub q0: RealField,
    pub a: DiskField,
    pub b: DiskField,
    pub psi_dot: DiskField,
    pub lambda: Option<BoundaryTrace>,
    pub phi_dot: Option<Vec<f64>>,
}

/// p₁ = ∂₂ ln V, p₂ = −∂₁ ln V.
pub fn compute_pk(patch: &SurfacePatch) -> Result<(RealField, RealField)> {
    let v = patch.v_field();
    if let Some(k) = v.values.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::geometry(format!("not locally convex: V = {:.3e} at node {k}", v.values[k])));
    }
    let (d1, d2) = gradient(&v.map(f64::ln))?;
    Ok((d2, d1.map(|x| -x)))
}

/// Time derivative of
/// Ψ₁ = −(c,₁∂₂N₀ − c,₂∂₁N₀ + ∂₁a^k∂₂N_k − ∂₂a^k∂₁N_k + ∂₂Q₁ − ∂₁Q₂)/V
/// from the state, its rates, and the provider terms at t.
pub fn compute_psi1_dot(
    provider: &dyn CoefficientProvider,
    patch: &SurfacePatch,
    state: &ChartState,
    t: f64,
) -> Result<RealField> {
    let terms = provider.terms(&patch.grid, state, t)?;
    psi1_dot_from_terms(&terms, patch, state)
}

pub(crate) fn psi1_dot_from_terms(terms: &ProviderTerms, patch: &SurfacePatch, state: &ChartState) -> Result<RealField> {
    let (c1, c2) = gradient(&state.c)?;
    let (cd1, cd2) = gradient(&state.c_dot)?;
    let ga = [gradient(&state.a1)?, gradient(&state.a2)?];
    let gad = [gradient(&state.a1_dot)?, gradient(&state.a2_dot)?];
    let n = patch.grid.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let d = |f: &RealField| f.values[i];
        let (n0, n0d) = (&terms.n0, &terms.n0_dot);
        let mut s = d(&cd1) * d(&n0.d2) + d(&c1) * d(&n0d.d2) - d(&cd2) * d(&n0.d1) - d(&c2) * d(&n0d.d1);
        for k in 0..2 {
            let (nk, nkd) = (&terms.n[k], &terms.n_dot[k]);
            s += d(&gad[k].0) * d(&nk.d2) + d(&ga[k].0) * d(&nkd.d2);
            s -= d(&gad[k].1) * d(&nk.d1) + d(&ga[k].1) * d(&nkd.d1);
        }
        s += d(&terms.q_dot[0].d2) - d(&terms.q_dot[1].d1);
        *o = -s / patch.nodes[i].v;
    }
    Ok(RealField { grid: patch.grid.clone(), values: out })
}

/// Splits the real lower-order terms into Au + Bū and builds Ψ̇ = ½(Ψ̇₂ + iΨ̇₁).
///
/// With u = ȧ¹ − iȧ², 2∂_z̄u = div ȧ + i(∂₂ȧ¹ − ∂₁ȧ²), and
/// 2(Au + Bū) = (q_k + ip_k)ȧ^k.
pub fn assemble_complex(
    p: (&RealField, &RealField),
    q: (&RealField, &RealField, &RealField),
    psi1_dot: &RealField,
    psi2_dot: &RealField,
) -> Result<SystemCoefficients> {
    let grid = p.0.grid.clone();
    let n = grid.len();
    for f in [p.1, q.0, q.1, q.2, psi1_dot, psi2_dot] {
        if f.values.len() != n || !f.grid.same_shape(&grid) {
            return Err(Error::invalid("coefficient fields live on different grids"));
        }
    }
    let i = Complex64::i();
    let mut av = Vec::with_capacity(n);
    let mut bv = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for k in 0..n {
        let (p1, p2) = (p.0.values[k], p.1.values[k]);
        let (q1, q2) = (q.0.values[k], q.1.values[k]);
        let a = Complex64::new(q1 - p2, p1 + q2) / 4.0;
        let b = Complex64::new(q1 + p2, p1 - q2) / 4.0;
        // back-substitution on the real basis ȧ = e₁, e₂
        for (a1, a2) in [(1.0, 0.0), (0.0, 1.0)] {
            let u = Complex64::new(a1, -a2);
            let lhs = 2.0 * (a * u + b * u.conj());
            let rhs = Complex64::new(q1 * a1 + q2 * a2, p1 * a1 + p2 * a2);
            let scale = 1.0 + p1.abs() + p2.abs() + q1.abs() + q2.abs();
            if (lhs - rhs).norm() > 1e-12 * scale {
                return Err(Error::solver(format!("back-substitution residual {:.3e} at node {k}", (lhs - rhs).norm())));
            }
        }
        av.push(a);
        bv.push(b);
        psi.push((psi2_dot.values[k] + i * psi1_dot.values[k]) / 2.0);
    }
    Ok(SystemCoefficients {
        p1: p.0.clone(),
        p2: p.1.clone(),
        q1: q.0.clone(),
        q2: q.1.clone(),
        q0: q.2.clone(),
        a: DiskField { grid: grid.clone(), values: av },
        b: DiskField { grid: grid.clone(), values: bv },
        psi_dot: DiskField { grid, values: psi },
        lambda: None,
        phi_dot: None,
    })
}

impl SystemCoefficients {
    /// The two real equations at every node for given rates:
    /// (∂₂ȧ¹ − ∂₁ȧ² + p_kȧ^k, ∂₁ȧ¹ + ∂₂ȧ² + q_kȧ^k), rebuilt from the complex form.
    pub fn real_residuals(&self, u: &DiskField, dbar_u: &DiskField) -> (RealField, RealField) {
        let vals: Vec<Complex64> = (0..u.values.len())
            .map(|k| 2.0 * (dbar_u.values[k] + self.a.values[k] * u.values[k] + self.b.values[k] * u.values[k].conj()))
            .collect();
        let grid = u.grid.clone();
        (
            RealField { grid: grid.clone(), values: vals.iter().map(|v| v.im).collect() },
            RealField { grid, values: vals.iter().map(|v| v.re).collect() },
        )
    }
}
