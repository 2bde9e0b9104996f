use std::fmt::Debug;
use std::sync::Arc;

use crate::deformation_flow::ChartState;
use crate::disk_field::{DiskField, DiskGrid, RealField};
use crate::error::{Error, Result};
use crate::expr::Expr;

/// A sampled scalar with its two parameter derivatives.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub value: RealField,
    pub d1: RealField,
    pub d2: RealField,
}

impl Sampled {
    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        let z = RealField::zeros(grid);
        Sampled { value: z.clone(), d1: z.clone(), d2: z }
    }

    pub fn grad(&self, i: usize) -> &RealField {
        if i == 0 {
            &self.d1
        } else {
            &self.d2
        }
    }

    fn is_zero(&self) -> bool {
        [&self.value, &self.d1, &self.d2].iter().all(|f| f.values.iter().all(|v| *v == 0.0))
    }
}

/// N₀, N_k, Q_i and their time derivatives at one time.
#[derive(Debug, Clone)]
pub struct ProviderTerms {
    pub n0: Sampled,
    pub n: [Sampled; 2],
    pub q: [Sampled; 2],
    pub n0_dot: Sampled,
    pub n_dot: [Sampled; 2],
    pub q_dot: [Sampled; 2],
}

impl ProviderTerms {
    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        let s = Sampled::zeros(grid);
        ProviderTerms {
            n0: s.clone(),
            n: [s.clone(), s.clone()],
            q: [s.clone(), s.clone()],
            n0_dot: s.clone(),
            n_dot: [s.clone(), s.clone()],
            q_dot: [s.clone(), s],
        }
    }

    pub fn is_zero(&self) -> bool {
        [&self.n0, &self.n[0], &self.n[1], &self.q[0], &self.q[1]].iter().all(|s| s.is_zero())
            && [&self.n0_dot, &self.n_dot[0], &self.n_dot[1], &self.q_dot[0], &self.q_dot[1]]
                .iter()
                .all(|s| s.is_zero())
    }

    /// Fails where 1 + N₀ comes within 1e-8 of zero.
    pub fn check_division(&self) -> Result<()> {
        if let Some(k) = self.n0.value.values.iter().position(|v| (1.0 + v).abs() < 1e-8) {
            return Err(Error::solver(format!("1 + N0 vanishes at node {k}")));
        }
        Ok(())
    }
}

/// Source of the coefficients that the closed forms of the deformation
/// equations leave open.
pub trait CoefficientProvider: Send + Sync + Debug {
    fn name(&self) -> String;

    fn terms(&self, grid: &Arc<DiskGrid>, state: &ChartState, t: f64) -> Result<ProviderTerms>;

    /// The lower-order map E(u) of the complex equation; real-linear in u.
    fn e_term(&self, u: &DiskField, _t: f64) -> DiskField {
        DiskField::zeros(&u.grid)
    }

    /// The remainder P₀ of the K-preservation equation.
    fn p0(&self, grid: &Arc<DiskGrid>, _state: &ChartState, _t: f64) -> RealField {
        RealField::zeros(grid)
    }

    /// True when every term vanishes identically for all t.
    fn is_trivial(&self) -> bool {
        false
    }
}

/// N₀ = N_k = Q_i = E = P₀ = 0 at all times.
#[derive(Debug, Clone, Copy, Default)]
pub struct Linearized;

impl CoefficientProvider for Linearized {
    fn name(&self) -> String {
        "linearized".into()
    }

    fn terms(&self, grid: &Arc<DiskGrid>, _state: &ChartState, _t: f64) -> Result<ProviderTerms> {
        Ok(ProviderTerms::zeros(grid))
    }

    fn is_trivial(&self) -> bool {
        true
    }
}

/// Closed-form coefficients in x1, x2, t. Absent entries are zero.
#[derive(Debug, Clone, Default)]
pub struct Synthetic {
    pub n0: Option<Expr>,
    pub n: [Option<Expr>; 2],
    pub q: [Option<Expr>; 2],
    /// E(u) = e·u with e a real expression.
    pub e: Option<Expr>,
}

impl Synthetic {
    /// Parses `key = expression` lines; keys n0, n1, n2, q1, q2, e. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn parse(src: &str) -> Result<Synthetic> {
        let mut s = Synthetic::default();
        for (lineno, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rhs) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected 'key = expression'", lineno + 1)))?;
            let e = Expr::parse(rhs.trim())?;
            let slot = match key.trim() {
                "n0" => &mut s.n0,
                "n1" => &mut s.n[0],
                "n2" => &mut s.n[1],
                "q1" => &mut s.q[0],
                "q2" => &mut s.q[1],
                "e" => &mut s.e,
                other => return Err(Error::invalid(format!("line {}: unknown key '{other}'", lineno + 1))),
            };
            if slot.is_some() {
                return Err(Error::invalid(format!("line {}: duplicate key", lineno + 1)));
            }
            *slot = Some(e);
        }
        Ok(s)
    }
}

fn sample(grid: &Arc<DiskGrid>, e: &Option<Expr>, t: f64, dt: bool) -> Sampled {
    let Some(e) = e else { return Sampled::zeros(grid) };
    let e = if dt { e.diff(2) } else { e.clone() };
    let (e1, e2) = (e.diff(0), e.diff(1));
    let f = |ex: &Expr| RealField::from_fn(grid, |x, y| ex.eval(x, y, t));
    Sampled { value: f(&e), d1: f(&e1), d2: f(&e2) }
}

impl CoefficientProvider for Synthetic {
    fn name(&self) -> String {
        "synthetic".into()
    }

    fn terms(&self, grid: &Arc<DiskGrid>, _state: &ChartState, t: f64) -> Result<ProviderTerms> {
        let terms = ProviderTerms {
            n0: sample(grid, &self.n0, t, false),
            n: [sample(grid, &self.n[0], t, false), sample(grid, &self.n[1], t, false)],
            q: [sample(grid, &self.q[0], t, false), sample(grid, &self.q[1], t, false)],
            n0_dot: sample(grid, &self.n0, t, true),
            n_dot: [sample(grid, &self.n[0], t, true), sample(grid, &self.n[1], t, true)],
            q_dot: [sample(grid, &self.q[0], t, true), sample(grid, &self.q[1], t, true)],
        };
        for s in [&terms.n0, &terms.n[0], &terms.n[1], &terms.q[0], &terms.q[1]] {
            if s.value.values.iter().chain(&s.d1.values).chain(&s.d2.values).any(|v| !v.is_finite()) {
                return Err(Error::solver("synthetic coefficient is not finite on the grid"));
            }
        }
        Ok(terms)
    }

    fn e_term(&self, u: &DiskField, t: f64) -> DiskField {
        match &self.e {
            None => DiskField::zeros(&u.grid),
            Some(e) => {
                let vals = u.grid.nodes.iter().zip(&u.values).map(|(z, w)| w * e.eval(z.re, z.im, t)).collect();
                DiskField { grid: u.grid.clone(), values: vals }
            }
        }
    }

    fn is_trivial(&self) -> bool {
        self.n0.is_none() && self.n.iter().chain(&self.q).all(Option::is_none) && self.e.is_none()
    }
}
