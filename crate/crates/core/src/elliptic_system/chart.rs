use std::sync::Arc;

use num_complex::Complex64;

use super::assemble::{assemble_complex, compute_pk, SystemCoefficients};
use super::linearize::{linearize_k, KCoefficients};
use super::provider::{CoefficientProvider, ProviderTerms};
use crate::deformation_flow::ChartState;
use crate::disk_field::{
    eval_poly, gradient, integrate_radial_then_angular, interpolate, BoundaryTrace, DiskField, OneForm,
    PompeiuOperator, Potential, RealField,
};
use crate::error::{Error, Result};
use crate::linalg::{gmres, GmresOptions, GmresReport};
use crate::surface_patch::SurfacePatch;

/// Time-independent per-chart data: p, the K-linearization, and A, B.
#[derive(Debug, Clone)]
pub struct ChartCoefficients {
    pub coeffs: SystemCoefficients,
    pub k: KCoefficients,
}

impl ChartCoefficients {
    pub fn compute(patch: &SurfacePatch) -> Result<Self> {
        let (p1, p2) = compute_pk(patch)?;
        let k = linearize_k(patch)?;
        let zero = RealField::zeros(&patch.grid);
        let coeffs = assemble_complex((&p1, &p2), (&k.q1, &k.q2, &k.q0), &zero, &zero)?;
        Ok(ChartCoefficients { coeffs, k })
    }
}

/// The rate equations of one chart at one (state, t): the complex equation
/// for u = ȧ¹ − iȧ² together with the line integral that recovers ċ.
#[derive(Debug, Clone)]
pub struct ChartSystem {
    pub patch: Arc<SurfacePatch>,
    pub cc: Arc<ChartCoefficients>,
    pub t_op: Arc<PompeiuOperator>,
    pub provider: Arc<dyn CoefficientProvider>,
    pub t: f64,
    pub forms: RateForms,
    anisotropic: bool,
    pub gmres: GmresOptions,
}

/// The ċ-gradient of one chart split into its rate-linear and state-driven
/// parts, with the canonical-path line integral.
#[derive(Debug, Clone)]
pub struct RateForms {
    pub patch: Arc<SurfacePatch>,
    pub state: ChartState,
    pub terms: ProviderTerms,
    trivial: bool,
}

/// Solution of the chart equation for one analytic part and one additive
/// constant of ċ.
#[derive(Debug, Clone)]
pub struct ChartResponse {
    pub phi: Vec<Complex64>,
    pub beta: f64,
    pub u: DiskField,
    /// Integrand of the T-representation u = Φ + T(f).
    pub f: DiskField,
    pub c_dot: Potential,
    pub u_boundary: Vec<Complex64>,
    pub report: GmresReport,
}

impl ChartResponse {
    pub fn u_at(&self, t_op: &PompeiuOperator, z: Complex64) -> Complex64 {
        eval_poly(&self.phi, z) + t_op.eval_at(&self.f, z)
    }

    pub fn c_dot_at(&self, z: Complex64) -> f64 {
        let f = self.c_dot.interior.to_complex();
        let b = BoundaryTrace {
            grid: f.grid.clone(),
            values: self.c_dot.boundary.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        };
        interpolate(&f, Some(&b), z).re
    }

    pub fn c_dot_boundary(&self) -> &[f64] {
        &self.c_dot.boundary
    }
}

fn to_vec(u: &DiskField) -> Vec<f64> {
    u.values.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn from_vec(grid: &Arc<crate::disk_field::DiskGrid>, x: &[f64]) -> DiskField {
    DiskField { grid: grid.clone(), values: x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect() }
}

fn curl(w1: &RealField, w2: &RealField) -> Result<RealField> {
    let (_, d2w1) = gradient(w1)?;
    let (d1w2, _) = gradient(w2)?;
    Ok(d2w1.zip_map(&d1w2, |a, b| a - b))
}

impl RateForms {
    /// Fails where 1 + N₀ vanishes.
    pub fn new(patch: Arc<SurfacePatch>, provider: &dyn CoefficientProvider, state: ChartState, t: f64) -> Result<Self> {
        let terms = provider.terms(&patch.grid, &state, t)?;
        terms.check_division()?;
        let trivial = provider.is_trivial() && terms.is_zero();
        Ok(RateForms { patch, state, terms, trivial })
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// ȧ¹, ȧ² from u.
    fn rates(u: &DiskField) -> (RealField, RealField) {
        (u.re(), u.im().map(|x| -x))
    }

    /// (b ȧ)_i at node k.
    fn b_times(&self, k: usize, a1: f64, a2: f64) -> (f64, f64) {
        let b = &self.patch.nodes[k].b;
        (b[(0, 0)] * a1 + b[(0, 1)] * a2, b[(1, 0)] * a1 + b[(1, 1)] * a2)
    }

    /// The part of the ċ-gradient that is linear in the rates:
    /// −(b ȧ)_i/(1 + N₀) − N_k ∂_iȧ^k/(1 + N₀).
    pub fn linear_form(&self, u: &DiskField) -> Result<(RealField, RealField)> {
        let (a1, a2) = Self::rates(u);
        let n = a1.values.len();
        let mut w1 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for k in 0..n {
            let (b1, b2) = self.b_times(k, a1.values[k], a2.values[k]);
            w1[k] = -b1;
            w2[k] = -b2;
        }
        if !self.trivial {
            let g = [gradient(&a1)?, gradient(&a2)?];
            for k in 0..n {
                let inv = 1.0 / (1.0 + self.terms.n0.value.values[k]);
                let mut s = [0.0; 2];
                for kk in 0..2 {
                    let nk = self.terms.n[kk].value.values[k];
                    s[0] += nk * g[kk].0.values[k];
                    s[1] += nk * g[kk].1.values[k];
                }
                w1[k] = (w1[k] - s[0]) * inv;
                w2[k] = (w2[k] - s[1]) * inv;
            }
        }
        let grid = &self.patch.grid;
        Ok((RealField { grid: grid.clone(), values: w1 }, RealField { grid: grid.clone(), values: w2 }))
    }

    /// The part of the ċ-gradient fixed by the state and provider alone:
    /// −(Ṅ_k∂_ia^k + Q̇_i)/(1 + N₀) + Ṅ₀((b a)_i + N_k∂_ia^k + Q_i)/(1 + N₀)².
    pub fn source_form(&self) -> Result<Option<(RealField, RealField)>> {
        if self.trivial {
            return Ok(None);
        }
        let s = &self.state;
        let g = [gradient(&s.a1)?, gradient(&s.a2)?];
        let tm = &self.terms;
        let n = self.patch.grid.len();
        let mut w = [vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let one = 1.0 + tm.n0.value.values[k];
            let ba = self.b_times(k, s.a1.values[k], s.a2.values[k]);
            let ba = [ba.0, ba.1];
            for i in 0..2 {
                let di = |f: &(RealField, RealField)| if i == 0 { f.0.values[k] } else { f.1.values[k] };
                let mut nd = 0.0;
                let mut nn = 0.0;
                for kk in 0..2 {
                    nd += tm.n_dot[kk].value.values[k] * di(&g[kk]);
                    nn += tm.n[kk].value.values[k] * di(&g[kk]);
                }
                let qd = tm.q_dot[i].value.values[k];
                let q = tm.q[i].value.values[k];
                w[i][k] = -(nd + qd) / one + tm.n0_dot.value.values[k] * (ba[i] + nn + q) / (one * one);
            }
        }
        let grid = &self.patch.grid;
        let [w1, w2] = w;
        Ok(Some((RealField { grid: grid.clone(), values: w1 }, RealField { grid: grid.clone(), values: w2 })))
    }

    pub fn potential(w: (RealField, RealField)) -> Potential {
        integrate_radial_then_angular(&OneForm { w1: w.0, w2: w.1, boundary: None })
    }

    /// ċ − β along the canonical path: L[u] plus the state-driven part.
    pub fn c_dot(&self, u: &DiskField) -> Result<Potential> {
        let mut pot = Self::potential(self.linear_form(u)?);
        if let Some(w) = self.source_form()? {
            let sp = Self::potential(w);
            pot.interior = pot.interior.zip_map(&sp.interior, |a, b| a + b);
            pot.boundary.iter_mut().zip(&sp.boundary).for_each(|(a, b)| *a += b);
        }
        Ok(pot)
    }
}

impl ChartSystem {
    pub fn new(
        patch: Arc<SurfacePatch>,
        cc: Arc<ChartCoefficients>,
        t_op: Arc<PompeiuOperator>,
        provider: Arc<dyn CoefficientProvider>,
        state: ChartState,
        t: f64,
    ) -> Result<Self> {
        let forms = RateForms::new(patch.clone(), provider.as_ref(), state, t)?;
        // b − V·I at the nodes as (b₁₁ − V, b₁₂)
        let aniso: Vec<(f64, f64)> = patch.nodes.iter().map(|p| (p.b[(0, 0)] - p.v, p.b[(0, 1)])).collect();
        let scale = patch.nodes.iter().map(|p| p.v.abs()).fold(0.0, f64::max);
        let anisotropic = aniso.iter().any(|(x, y)| x.abs().max(y.abs()) > 1e-13 * scale)
            || cc.k.s1.values.iter().chain(&cc.k.s2.values).any(|s| s.abs() > 1e-9);
        Ok(ChartSystem { patch, cc, t_op, provider, t, forms, anisotropic, gmres: GmresOptions::default() })
    }

    pub fn grid(&self) -> &Arc<crate::disk_field::DiskGrid> {
        &self.patch.grid
    }

    pub fn state(&self) -> &ChartState {
        &self.forms.state
    }

    /// Linear lower-order map E(u): the provider's E, the trace-free part of
    /// the K-linearization, and the curl of the non-isotropic part of the
    /// ċ-gradient.
    pub fn e_term(&self, u: &DiskField) -> Result<DiskField> {
        let mut e = self.provider.e_term(u, self.t);
        if !self.anisotropic && self.forms.is_trivial() {
            return Ok(e);
        }
        let (a1, a2) = RateForms::rates(u);
        let (g1, g2) = (gradient(&a1)?, gradient(&a2)?);
        let (w1, w2) = self.forms.linear_form(u)?;
        let n = a1.values.len();
        // ω + V ȧ removes the isotropic part already carried by p
        let r1 = RealField {
            grid: w1.grid.clone(),
            values: (0..n).map(|k| w1.values[k] + self.patch.nodes[k].v * a1.values[k]).collect(),
        };
        let r2 = RealField {
            grid: w2.grid.clone(),
            values: (0..n).map(|k| w2.values[k] + self.patch.nodes[k].v * a2.values[k]).collect(),
        };
        let cr = curl(&r1, &r2)?;
        let kc = &self.cc.k;
        for k in 0..n {
            let p0 = kc.s1.values[k] * (g1.0.values[k] - g2.1.values[k]) + kc.s2.values[k] * (g2.0.values[k] + g1.1.values[k]);
            let psi1 = cr.values[k] / self.patch.nodes[k].v;
            e.values[k] += Complex64::new(0.5 * p0, -0.5 * psi1);
        }
        Ok(e)
    }

    /// Ψ̇ − Au − Bū − E(u) for the linear part, with ċ = L[u] (no constant).
    fn f_linear(&self, u: &DiskField) -> Result<(DiskField, Potential)> {
        let pot = RateForms::potential(self.forms.linear_form(u)?);
        let e = self.e_term(u)?;
        let c = &self.cc.coeffs;
        let q0 = &c.q0.values;
        let vals = (0..u.values.len())
            .map(|k| {
                let w = u.values[k];
                0.5 * q0[k] * pot.interior.values[k] - c.a.values[k] * w - c.b.values[k] * w.conj() - e.values[k]
            })
            .collect();
        Ok((DiskField { grid: u.grid.clone(), values: vals }, pot))
    }

    /// Source part of the integrand for a given ċ constant β; the state-driven
    /// terms only when `with_state`.
    fn f_source(&self, beta: f64, with_state: bool) -> Result<(DiskField, Option<Potential>)> {
        let q0 = &self.cc.coeffs.q0.values;
        let mut vals: Vec<Complex64> = q0.iter().map(|q| Complex64::new(0.5 * q * beta, 0.0)).collect();
        let mut pot = None;
        let w = if with_state { self.forms.source_form()? } else { None };
        if let Some(w) = w {
            let cr = curl(&w.0, &w.1)?;
            let p = RateForms::potential(w);
            for k in 0..vals.len() {
                vals[k] += 0.5 * q0[k] * p.interior.values[k];
                vals[k] += Complex64::new(0.0, 0.5 * cr.values[k] / self.patch.nodes[k].v);
            }
            pot = Some(p);
        }
        Ok((DiskField { grid: self.patch.grid.clone(), values: vals }, pot))
    }

    /// ċ = L[u]: the potential of the rate-linear part of the ċ-gradient.
    pub fn c_dot_of(&self, u: &DiskField) -> Result<RealField> {
        Ok(self.c_dot_potential(u)?.interior)
    }

    /// L[u] at the nodes and boundary samples.
    pub fn c_dot_potential(&self, u: &DiskField) -> Result<Potential> {
        Ok(RateForms::potential(self.forms.linear_form(u)?))
    }

    pub fn has_source(&self) -> bool {
        !self.forms.is_trivial()
    }

    /// Solves u = Φ + T(Ψ̇ − Au − Bū − E(u)) with ċ = L[u] + β by GMRES,
    /// optionally including the state-driven source terms.
    pub fn solve(&self, phi: &[Complex64], beta: f64, with_source: bool) -> Result<ChartResponse> {
        let grid = self.patch.grid.clone();
        let phi_field = DiskField { grid: grid.clone(), values: grid.nodes.iter().map(|&z| eval_poly(phi, z)).collect() };
        let (fs, spot) = self.f_source(beta, with_source)?;
        let rhs = phi_field.add(&self.t_op.apply(&fs));
        let op = |x: &[f64]| -> Vec<f64> {
            let u = from_vec(&grid, x);
            match self.f_linear(&u) {
                Ok((f, _)) => to_vec(&u.sub(&self.t_op.apply(&f))),
                Err(_) => vec![f64::NAN; x.len()],
            }
        };
        let (x, report) = gmres(op, &to_vec(&rhs), None, self.gmres)?;
        let u = from_vec(&grid, &x);
        if !u.is_finite() {
            return Err(Error::solver("chart solve produced non-finite values"));
        }
        let (fl, mut pot) = self.f_linear(&u)?;
        let f = fl.add(&fs);
        if let Some(sp) = spot {
            pot.interior = pot.interior.zip_map(&sp.interior, |a, b| a + b);
            pot.boundary.iter_mut().zip(&sp.boundary).for_each(|(a, b)| *a += b);
        }
        pot.interior = pot.interior.map(|v| v + beta);
        pot.boundary.iter_mut().for_each(|v| *v += beta);
        let tb = self.t_op.boundary_trace(&f);
        let u_boundary = grid
            .boundary_samples
            .iter()
            .zip(&tb.values)
            .map(|(&z, tv)| eval_poly(phi, z) + tv)
            .collect();
        Ok(ChartResponse { phi: phi.to_vec(), beta, u, f, c_dot: pot, u_boundary, report })
    }
}
