//! Closed surfaces from two charts: the lower chart on the unit disk and the
//! upper chart in the inverted coordinate ζ = 1/z̄, glued along the unit
//! circle Γ.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::ambient_metric::{AmbientMetric, Vec3};
use crate::deformation_flow::ChartState;
use crate::disk_field::{BoundaryTrace, DiskField, DiskGrid, PompeiuOperator, Potential, RealField};
use crate::elliptic_system::{ChartCoefficients, ChartResponse, ChartSystem, CoefficientProvider, RateForms};
use crate::error::{Error, Result};
use crate::linalg::{scaled_null_space, svd, GapRule, GmresOptions};
use crate::rh_solver::compute_index;
use crate::surface_patch::{build_patch, conjugate_isothermal_residual, StereographicQuadric, SurfacePatch};

/// Largest disagreement of the two charts over Γ.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GammaMismatch {
    pub position: f64,
    pub normal: f64,
    pub curvature: f64,
}

/// Two patches covering a closed surface, sharing the boundary circle.
#[derive(Debug, Clone)]
pub struct GluedSurface {
    pub plus: Arc<SurfacePatch>,
    pub minus: Arc<SurfacePatch>,
    /// Boundary samples of the plus chart.
    pub gamma: Vec<Complex64>,
    /// Plus boundary sample j sits at minus boundary sample s_m[j].
    pub s_m: Vec<usize>,
    pub mismatch: GammaMismatch,
}

const POSITION_TOL: f64 = 1e-10;
const GEOMETRY_TOL: f64 = 1e-8;

impl GluedSurface {
    /// Matches boundary samples by position and checks that positions,
    /// normals, K and H agree across Γ.
    pub fn new(plus: SurfacePatch, minus: SurfacePatch) -> Result<Self> {
        if !plus.grid.same_shape(&minus.grid) {
            return Err(Error::invalid(format!(
                "chart grids differ: ({}, {}) vs ({}, {})",
                plus.grid.n_radial, plus.grid.n_angular, minus.grid.n_radial, minus.grid.n_angular
            )));
        }
        let mut s_m = Vec::with_capacity(plus.boundary.len());
        let mut mm = GammaMismatch::default();
        for p in &plus.boundary {
            let (j, d) = minus
                .boundary
                .iter()
                .enumerate()
                .map(|(j, q)| (j, (q.y - p.y).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty boundary");
            let q = &minus.boundary[j];
            mm.position = mm.position.max(d);
            mm.normal = mm.normal.max((q.n - p.n).norm());
            mm.curvature = mm.curvature.max((q.k - p.k).abs()).max((q.h - p.h).abs());
            s_m.push(j);
        }
        if mm.position > POSITION_TOL {
            return Err(Error::geometry(format!("boundary mismatch: charts differ by {:.3e} on the gluing curve", mm.position)));
        }
        if mm.normal > GEOMETRY_TOL {
            return Err(Error::geometry(format!("inconsistent orientation: normals differ by {:.3e} on the gluing curve", mm.normal)));
        }
        if mm.curvature > GEOMETRY_TOL {
            return Err(Error::geometry(format!("curvatures differ by {:.3e} on the gluing curve", mm.curvature)));
        }
        let gamma = plus.grid.boundary_samples.clone();
        Ok(GluedSurface { plus: Arc::new(plus), minus: Arc::new(minus), gamma, s_m, mismatch: mm })
    }

    /// The same surface with the roles of the charts exchanged.
    pub fn swapped(&self) -> Result<Self> {
        GluedSurface::new((*self.minus).clone(), (*self.plus).clone())
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.plus.grid
    }

    pub fn contiguity(&self) -> ContiguityConditions {
        ContiguityConditions::new(self)
    }
}

/// The quadric (x, y, ±h(...)) glued from its lower and upper halves, both
/// by stereographic projection; h = 1 is the unit sphere.
pub fn build_glued_quadric(metric: &AmbientMetric, grid: &Arc<DiskGrid>, height: f64) -> Result<GluedSurface> {
    let plus = build_patch(metric, Arc::new(StereographicQuadric::ellipsoid(height)), grid)?;
    let minus = build_patch(metric, Arc::new(StereographicQuadric::ellipsoid(-height)), grid)?;
    GluedSurface::new(plus, minus)
}

pub fn build_glued_sphere(metric: &AmbientMetric, grid: &Arc<DiskGrid>) -> Result<GluedSurface> {
    build_glued_quadric(metric, grid, 1.0)
}

/// Frame along Γ: unit tangent s, unit conormal v pointing out of the plus
/// chart, and the parameter coefficients l of v in the plus chart.
#[derive(Debug, Clone)]
pub struct ContiguityConditions {
    pub tangent: Vec<Vec3>,
    pub conormal: Vec<Vec3>,
    pub l: Vec<(f64, f64)>,
    /// Ambient point of each sample, for the metric.
    points: Vec<Vec3>,
    metric: AmbientMetric,
    s_m: Vec<usize>,
    plus_tangents: Vec<(Vec3, Vec3)>,
    minus_tangents: Vec<(Vec3, Vec3)>,
}

/// Mismatch of one pair of boundary fields at each sample: tangent and
/// conormal components of the tangential displacement rate, then ċ.
pub type Mismatch = Vec<[f64; 3]>;

impl ContiguityConditions {
    pub fn new(glued: &GluedSurface) -> Self {
        let metric = glued.plus.metric;
        let mut tangent = Vec::new();
        let mut conormal = Vec::new();
        let mut l = Vec::new();
        let mut points = Vec::new();
        for (p, z) in glued.plus.boundary.iter().zip(&glued.gamma) {
            let (c, s) = (z.re / z.norm(), z.im / z.norm());
            let yt = p.y1 * (-s) + p.y2 * c;
            let yr = p.y1 * c + p.y2 * s;
            let nt = metric.norm(&p.y, &yt);
            let sv = yt / nt;
            let proj = metric.inner(&p.y, &yr, &sv);
            let raw = yr - sv * proj;
            let nv = metric.norm(&p.y, &raw);
            tangent.push(sv);
            conormal.push(raw / nv);
            l.push(((c + proj / nt * s) / nv, (s - proj / nt * c) / nv));
            points.push(p.y);
        }
        ContiguityConditions {
            tangent,
            conormal,
            l,
            points,
            metric,
            s_m: glued.s_m.clone(),
            plus_tangents: glued.plus.boundary.iter().map(|p| (p.y1, p.y2)).collect(),
            minus_tangents: glued.minus.boundary.iter().map(|p| (p.y1, p.y2)).collect(),
        }
    }

    /// Largest violation of the orthonormality of (s, v) in ã and of
    /// g(l, l) = 1, g(l, s) = 0 in the plus chart.
    pub fn frame_residual(&self, glued: &GluedSurface) -> f64 {
        let mut r: f64 = 0.0;
        for (k, p) in glued.plus.boundary.iter().enumerate() {
            let (s, v, y) = (&self.tangent[k], &self.conormal[k], &self.points[k]);
            r = r
                .max(self.metric.inner(y, v, s).abs())
                .max((self.metric.inner(y, v, v) - 1.0).abs())
                .max((self.metric.inner(y, s, s) - 1.0).abs());
            let (l1, l2) = self.l[k];
            let gll = p.g[(0, 0)] * l1 * l1 + 2.0 * p.g[(0, 1)] * l1 * l2 + p.g[(1, 1)] * l2 * l2;
            r = r.max((gll - 1.0).abs());
        }
        r
    }

    /// ȧ^i y_i from u = ȧ¹ − iȧ².
    fn vector(t: &(Vec3, Vec3), u: Complex64) -> Vec3 {
        t.0 * u.re - t.1 * u.im
    }

    /// Mismatch of (u⁺, ċ⁺) against (u⁻, ċ⁻), both given at their own
    /// chart's boundary samples.
    pub fn mismatch(&self, plus: (&[Complex64], &[f64]), minus: (&[Complex64], &[f64])) -> Mismatch {
        (0..self.tangent.len())
            .map(|j| {
                let jm = self.s_m[j];
                let d = Self::vector(&self.plus_tangents[j], plus.0[j]) - Self::vector(&self.minus_tangents[jm], minus.0[jm]);
                let y = &self.points[j];
                [self.metric.inner(y, &self.tangent[j], &d), self.metric.inner(y, &self.conormal[j], &d), plus.1[j] - minus.1[jm]]
            })
            .collect()
    }

    pub fn sup(m: &Mismatch) -> f64 {
        m.iter().flat_map(|r| r.iter()).fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Φ⁺ = UΦ⁻ on Γ with Φ⁻ vanishing at infinity and optionally Φ⁺(z₀) = 0.
#[derive(Debug, Clone)]
pub struct CarlemanProblem {
    pub u: BoundaryTrace,
    pub kappa: i64,
    pub z0: Option<Complex64>,
}

impl CarlemanProblem {
    pub fn new(u: BoundaryTrace, z0: Option<Complex64>) -> Result<Self> {
        let min = u.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::invalid("transmission coefficient vanishes on the contour"));
        }
        if let Some(z) = z0 {
            if z.norm() >= 1.0 {
                return Err(Error::invalid("normalization point must lie inside the disk"));
            }
        }
        let kappa = compute_index(&u)?;
        Ok(CarlemanProblem { u, kappa, z0 })
    }
}

/// Coefficients of Φ⁺ = Σ_{k≥0} a_k z^k and Φ⁻ = Σ_{k≥1} b_k z^{−k}.
#[derive(Debug, Clone)]
pub struct CarlemanSolution {
    pub plus: Vec<Vec<Complex64>>,
    pub minus: Vec<Vec<Complex64>>,
    pub dimension: usize,
    pub singular_values: Vec<f64>,
}

/// Homogeneous transmission family in truncated bases of the given degree.
pub fn solve_carleman(problem: &CarlemanProblem, degree: usize, gap: &GapRule) -> Result<CarlemanSolution> {
    if problem.kappa != 0 {
        return Err(Error::invalid(format!("index {} is not supported; only index 0", problem.kappa)));
    }
    if degree == 0 {
        return Err(Error::invalid("degree must be positive"));
    }
    let grid = &problem.u.grid;
    let nb = grid.n_boundary();
    let np = degree + 1;
    let ncols = 2 * (np + degree);
    let extra = if problem.z0.is_some() { 2 } else { 0 };
    let w = (2.0 * std::f64::consts::PI / nb as f64).sqrt();
    let mut m = DMatrix::zeros(2 * nb + extra, ncols);
    // column of a unit real or imaginary coefficient
    let unit = |c: usize| if c % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::i() };
    for (j, z) in grid.boundary_samples.iter().enumerate() {
        let uj = problem.u.values[j];
        for c in 0..ncols {
            let k = c / 2;
            let v = if k < np { unit(c) * z.powu(k as u32) } else { -uj * unit(c) * z.powi(-((k - np + 1) as i32)) };
            m[(2 * j, c)] = w * v.re;
            m[(2 * j + 1, c)] = w * v.im;
        }
    }
    if let Some(z0) = problem.z0 {
        for c in 0..2 * np {
            let v = unit(c) * z0.powu((c / 2) as u32);
            m[(2 * nb, c)] = v.re;
            m[(2 * nb + 1, c)] = v.im;
        }
    }
    let (sv, null) = scaled_null_space(&m, gap)?;
    let coeffs = |c: usize, range: std::ops::Range<usize>| -> Vec<Complex64> {
        range.map(|k| Complex64::new(null[(2 * k, c)], null[(2 * k + 1, c)])).collect()
    };
    let plus = (0..null.ncols()).map(|c| coeffs(c, 0..np)).collect();
    let minus = (0..null.ncols()).map(|c| coeffs(c, np..np + degree)).collect();
    Ok(CarlemanSolution { plus, minus, dimension: null.ncols(), singular_values: sv })
}

/// Free: the whole homogeneous family. PointFixed: the plus-chart rate and ċ
/// vanish at z₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Free,
    PointFixed { z0: Complex64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ClosedOptions {
    /// Degree of the analytic part Φ on each chart.
    pub degree: usize,
    pub gap: GapRule,
    /// Sup-norm bound on the Γ-mismatch of every returned member.
    pub contiguity_tol: f64,
    /// Bound on the conjugate-isothermal residual of both charts.
    pub isothermal_tol: f64,
    pub gmres: GmresOptions,
}

impl Default for ClosedOptions {
    fn default() -> Self {
        ClosedOptions {
            degree: 8,
            gap: GapRule::default(),
            // the Γ-mismatch of exact families is O(h²): ~2e-4 at (64, 128)
            contiguity_tol: 1e-2,
            // anisotropic charts are handled through E
            isothermal_tol: 0.1,
            gmres: GmresOptions::default(),
        }
    }
}

/// Rates of one chart.
#[derive(Debug, Clone)]
pub struct ChartRates {
    pub u: DiskField,
    pub u_boundary: Vec<Complex64>,
    pub c_dot: Potential,
}

impl ChartRates {
    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        ChartRates {
            u: DiskField::zeros(grid),
            u_boundary: vec![Complex64::new(0.0, 0.0); grid.n_boundary()],
            c_dot: Potential { interior: RealField::zeros(grid), boundary: vec![0.0; grid.n_boundary()] },
        }
    }

    fn axpy(&mut self, a: f64, r: &ChartResponse) {
        for (x, y) in self.u.values.iter_mut().zip(&r.u.values) {
            *x += a * y;
        }
        for (x, y) in self.u_boundary.iter_mut().zip(&r.u_boundary) {
            *x += a * y;
        }
        for (x, y) in self.c_dot.interior.values.iter_mut().zip(&r.c_dot.interior.values) {
            *x += a * y;
        }
        for (x, y) in self.c_dot.boundary.iter_mut().zip(&r.c_dot.boundary) {
            *x += a * y;
        }
    }

    pub fn a1_dot(&self) -> RealField {
        self.u.re()
    }

    pub fn a2_dot(&self) -> RealField {
        self.u.im().map(|x| -x)
    }
}

/// Rates on both charts, with the coefficient vector that produced them.
#[derive(Debug, Clone)]
pub struct GlobalField {
    pub coeffs: Vec<f64>,
    pub plus: ChartRates,
    pub minus: ChartRates,
}

impl GlobalField {
    pub fn sup_norm(&self) -> f64 {
        [&self.plus, &self.minus]
            .iter()
            .map(|c| c.u.sup_norm().max(c.c_dot.interior.sup_norm()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ClosedSolution {
    pub mode: Mode,
    pub dimension: usize,
    pub singular_values: Vec<f64>,
    /// In free mode with dimension 3, the basis dual to (Re Φ⁺(0), Im Φ⁺(0),
    /// B₁⁻); otherwise an orthonormal null basis in coefficient space.
    pub basis: Vec<GlobalField>,
    pub canonical: bool,
    /// Least-squares solution orthogonal to the family (zero when the
    /// provider has no state-driven terms).
    pub particular: GlobalField,
    pub transmission_residual: f64,
    pub b1_minus: f64,
}

impl ClosedSolution {
    /// particular + Σ params_i basis_i.
    pub fn member(&self, params: &[f64]) -> Result<GlobalField> {
        if params.len() != self.basis.len() {
            return Err(Error::invalid(format!(
                "family has {} parameters, {} given",
                self.basis.len(),
                params.len()
            )));
        }
        let mut out = self.particular.clone();
        for (p, b) in params.iter().zip(&self.basis) {
            for (x, y) in out.coeffs.iter_mut().zip(&b.coeffs) {
                *x += p * y;
            }
            for (o, s) in [(&mut out.plus, &b.plus), (&mut out.minus, &b.minus)] {
                o.u = o.u.add(&s.u.scale(Complex64::new(*p, 0.0)));
                o.u_boundary.iter_mut().zip(&s.u_boundary).for_each(|(x, y)| *x += p * y);
                o.c_dot.interior = o.c_dot.interior.zip_map(&s.c_dot.interior, |x, y| x + p * y);
                o.c_dot.boundary.iter_mut().zip(&s.c_dot.boundary).for_each(|(x, y)| *x += p * y);
            }
        }
        Ok(out)
    }
}

/// Per-chart data of the closed problem that does not depend on the state.
#[derive(Debug, Clone)]
pub struct ClosedSystem {
    pub glued: GluedSurface,
    pub provider: Arc<dyn CoefficientProvider>,
    pub opts: ClosedOptions,
    cc: [Arc<ChartCoefficients>; 2],
    t_op: Arc<PompeiuOperator>,
    contiguity: ContiguityConditions,
}

fn check_chart(patch: &SurfacePatch, tol: f64, name: &str) -> Result<()> {
    if let Some(k) = patch.nodes.iter().chain(&patch.boundary).position(|p| !(p.k > 0.0)) {
        return Err(Error::geometry(format!("{name} chart is not strictly convex (sample {k})")));
    }
    let r = conjugate_isothermal_residual(patch);
    if r > tol {
        return Err(Error::geometry(format!(
            "{name} chart is not conjugate isothermal: residual {r:.3e} above {tol:.1e}"
        )));
    }
    Ok(())
}

impl ClosedSystem {
    pub fn new(glued: GluedSurface, provider: Arc<dyn CoefficientProvider>, opts: ClosedOptions) -> Result<Self> {
        check_chart(&glued.plus, opts.isothermal_tol, "plus")?;
        check_chart(&glued.minus, opts.isothermal_tol, "minus")?;
        let (cp, cm) = rayon::join(|| ChartCoefficients::compute(&glued.plus), || ChartCoefficients::compute(&glued.minus));
        let t_op = Arc::new(PompeiuOperator::new(&glued.plus.grid));
        let contiguity = glued.contiguity();
        Ok(ClosedSystem { cc: [Arc::new(cp?), Arc::new(cm?)], t_op, contiguity, glued, provider, opts })
    }

    pub fn t_op(&self) -> &Arc<PompeiuOperator> {
        &self.t_op
    }

    pub fn contiguity_conditions(&self) -> &ContiguityConditions {
        &self.contiguity
    }

    fn chart_system(&self, chart: usize, state: &ChartState, t: f64) -> Result<ChartSystem> {
        let patch = if chart == 0 { &self.glued.plus } else { &self.glued.minus };
        let mut s = ChartSystem::new(
            patch.clone(),
            self.cc[chart].clone(),
            self.t_op.clone(),
            self.provider.clone(),
            state.clone(),
            t,
        )?;
        s.gmres = self.opts.gmres;
        Ok(s)
    }

    /// Parameters per chart: Re, Im of each Φ coefficient, then β.
    pub fn chart_columns(&self) -> usize {
        2 * (self.opts.degree + 1) + 1
    }

    fn respond(&self, sys: &ChartSystem, col: usize) -> Result<ChartResponse> {
        let np = self.opts.degree + 1;
        let mut phi = vec![Complex64::new(0.0, 0.0); np];
        if col < 2 * np {
            phi[col / 2] = if col % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::i() };
            sys.solve(&phi, 0.0, false)
        } else {
            sys.solve(&phi, 1.0, false)
        }
    }

    fn mismatch_of(&self, plus: &ChartRates, minus: &ChartRates) -> Mismatch {
        self.contiguity.mismatch(
            (&plus.u_boundary, &plus.c_dot.boundary),
            (&minus.u_boundary, &minus.c_dot.boundary),
        )
    }

    /// The global rate problem at one (state, t).
    pub fn solve(&self, states: [&ChartState; 2], t: f64, mode: Mode) -> Result<ClosedSolution> {
        if let Mode::PointFixed { z0 } = mode {
            if z0.norm() >= 1.0 {
                return Err(Error::invalid("z0 must lie strictly inside the disk"));
            }
        }
        let systems = [self.chart_system(0, states[0], t)?, self.chart_system(1, states[1], t)?];
        let nc = self.chart_columns();
        let responses: Vec<ChartResponse> = (0..2 * nc)
            .into_par_iter()
            .map(|c| self.respond(&systems[c / nc], c % nc))
            .collect::<Result<_>>()?;
        let grid = self.glued.grid().clone();
        let zero = ChartRates::zeros(&grid);
        let nb = grid.n_boundary();
        let weight = (2.0 * std::f64::consts::PI / nb as f64).sqrt();
        let extra = if matches!(mode, Mode::PointFixed { .. }) { 3 } else { 0 };
        let mut m = DMatrix::zeros(3 * nb + extra, 2 * nc);
        for (c, r) in responses.iter().enumerate() {
            let mut rates = ChartRates::zeros(&grid);
            rates.axpy(1.0, r);
            let mm = if c < nc { self.mismatch_of(&rates, &zero) } else { self.mismatch_of(&zero, &rates) };
            for (j, row) in mm.iter().enumerate() {
                for i in 0..3 {
                    m[(3 * j + i, c)] = weight * row[i];
                }
            }
            if let (Mode::PointFixed { z0 }, true) = (mode, c < nc) {
                let u = r.u_at(&self.t_op, z0);
                m[(3 * nb, c)] = u.re;
                m[(3 * nb + 1, c)] = u.im;
                m[(3 * nb + 2, c)] = r.c_dot_at(z0);
            }
        }
        // state-driven part with Φ = 0, β = 0
        let source: Option<[ChartResponse; 2]> = if systems.iter().any(|s| s.has_source()) {
            let phi = vec![Complex64::new(0.0, 0.0); self.opts.degree + 1];
            let (a, b) = rayon::join(|| systems[0].solve(&phi, 0.0, true), || systems[1].solve(&phi, 0.0, true));
            Some([a?, b?])
        } else {
            None
        };
        let mut rhs = DVector::zeros(m.nrows());
        if let Some(src) = &source {
            let mut p = ChartRates::zeros(&grid);
            p.axpy(1.0, &src[0]);
            let mut q = ChartRates::zeros(&grid);
            q.axpy(1.0, &src[1]);
            for (j, row) in self.mismatch_of(&p, &q).iter().enumerate() {
                for i in 0..3 {
                    rhs[3 * j + i] = -weight * row[i];
                }
            }
            if let Mode::PointFixed { z0 } = mode {
                let u = src[0].u_at(&self.t_op, z0);
                rhs[3 * nb] = -u.re;
                rhs[3 * nb + 1] = -u.im;
                rhs[3 * nb + 2] = -src[0].c_dot_at(z0);
            }
        }
        let (sv, null) = scaled_null_space(&m, &self.opts.gap)?;
        let dim = null.ncols();
        let x_part = particular(&m, &rhs, &null)?;
        let build = |x: &[f64], with_source: bool| -> GlobalField {
            let mut plus = ChartRates::zeros(&grid);
            let mut minus = ChartRates::zeros(&grid);
            if let (true, Some(src)) = (with_source, &source) {
                plus.axpy(1.0, &src[0]);
                minus.axpy(1.0, &src[1]);
            }
            for (c, r) in responses.iter().enumerate() {
                if x[c] != 0.0 {
                    if c < nc { plus.axpy(x[c], r) } else { minus.axpy(x[c], r) }
                }
            }
            GlobalField { coeffs: x.to_vec(), plus, minus }
        };
        let (basis_coeffs, canonical) = self.canonical_basis(&null, mode);
        let basis: Vec<GlobalField> = basis_coeffs.iter().map(|x| build(x, false)).collect();
        let part = build(x_part.as_slice(), true);
        let residual = basis
            .iter()
            .chain(std::iter::once(&part))
            .map(|f| ContiguityConditions::sup(&self.mismatch_of(&f.plus, &f.minus)))
            .fold(0.0, f64::max);
        if !residual.is_finite() || residual > self.opts.contiguity_tol {
            return Err(Error::solver(format!(
                "contiguity residual above tolerance: {residual:.3e} > {:.1e}",
                self.opts.contiguity_tol
            )));
        }
        Ok(ClosedSolution {
            mode,
            dimension: dim,
            singular_values: sv,
            canonical,
            b1_minus: x_part[2 * nc - 1],
            basis,
            particular: part,
            transmission_residual: residual,
        })
    }

    /// Null vectors in coefficient space; dual to (Re Φ⁺₀, Im Φ⁺₀, β⁻) when
    /// that 3×3 block is well conditioned.
    fn canonical_basis(&self, null: &DMatrix<f64>, mode: Mode) -> (Vec<Vec<f64>>, bool) {
        let dim = null.ncols();
        let raw = || (0..dim).map(|c| null.column(c).iter().copied().collect()).collect();
        if dim != 3 || mode != Mode::Free {
            return (raw(), false);
        }
        let last = 2 * self.chart_columns() - 1;
        let c = DMatrix::from_fn(3, 3, |i, j| null[([0, 1, last][i], j)]);
        let Ok(d) = svd(&c) else { return (raw(), false) };
        if d.s[2] < 1e-6 * d.s[0] {
            return (raw(), false);
        }
        let Some(inv) = c.try_inverse() else { return (raw(), false) };
        let b = null * inv;
        ((0..3).map(|k| b.column(k).iter().copied().collect()).collect(), true)
    }
}

/// Minimum-norm least-squares solution restricted to the complement of the
/// discarded null directions.
fn particular(m: &DMatrix<f64>, rhs: &DVector<f64>, null: &DMatrix<f64>) -> Result<DVector<f64>> {
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(DVector::zeros(m.ncols()));
    }
    // append the null directions as zero-valued constraints
    let mut a = DMatrix::zeros(m.nrows() + null.ncols(), m.ncols());
    a.rows_mut(0, m.nrows()).copy_from(m);
    let scale = m.norm();
    for c in 0..null.ncols() {
        let n = null.column(c).norm();
        for j in 0..m.ncols() {
            a[(m.nrows() + c, j)] = scale * null[(j, c)] / n;
        }
    }
    let mut b = DVector::zeros(a.nrows());
    b.rows_mut(0, m.nrows()).copy_from(rhs);
    crate::linalg::lstsq(&a, &b, 1e-10)
}

pub fn solve_closed(
    glued: &GluedSurface,
    provider: Arc<dyn CoefficientProvider>,
    mode: Mode,
    opts: ClosedOptions,
) -> Result<ClosedSolution> {
    let sys = ClosedSystem::new(glued.clone(), provider, opts)?;
    let grid = glued.grid();
    let zero = ChartState::zero(grid);
    sys.solve([&zero, &zero], 0.0, mode)
}

/// ċ on the minus chart from its tangential rate, with the constant B₁
/// chosen to minimize the Γ-mismatch against ċ⁺.
#[derive(Debug, Clone)]
pub struct CMinus {
    pub c_dot: Potential,
    pub b1: f64,
    pub residual: f64,
}

pub fn recover_c_minus(
    glued: &GluedSurface,
    u_minus: &DiskField,
    provider: &dyn CoefficientProvider,
    state: &ChartState,
    t: f64,
    c_plus_boundary: &[f64],
) -> Result<CMinus> {
    let forms = RateForms::new(glued.minus.clone(), provider, state.clone(), t)?;
    let mut pot = forms.c_dot(u_minus)?;
    let n = glued.s_m.len();
    let b1 = (0..n).map(|j| c_plus_boundary[j] - pot.boundary[glued.s_m[j]]).sum::<f64>() / n as f64;
    pot.interior = pot.interior.map(|v| v + b1);
    pot.boundary.iter_mut().for_each(|v| *v += b1);
    let residual = (0..n)
        .map(|j| (c_plus_boundary[j] - pot.boundary[glued.s_m[j]]).abs())
        .fold(0.0, f64::max);
    Ok(CMinus { c_dot: pot, b1, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk_field::make_grid;

    #[test]
    fn sphere_charts_agree_on_gamma() {
        let g = make_grid(16, 32).unwrap();
        let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
        assert!(s.mismatch.position <= 1e-10);
        assert!(s.mismatch.curvature <= 1e-10);
        for p in s.plus.nodes.iter().chain(&s.minus.nodes) {
            assert!((p.k - 1.0).abs() < 1e-10);
        }
        assert_eq!(s.s_m, (0..32).collect::<Vec<_>>());
    }

    #[test]
    fn perturbed_sphere_charts_agree_on_gamma() {
        let g = make_grid(16, 32).unwrap();
        let s = build_glued_sphere(&AmbientMetric::DiagPerturbation { epsilon: 0.05 }, &g).unwrap();
        assert!(s.mismatch.position <= 1e-10);
        assert!(s.mismatch.normal <= 1e-8 && s.mismatch.curvature <= 1e-8);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let m = AmbientMetric::Euclidean;
        let a = build_patch(&m, Arc::new(StereographicQuadric::lower_sphere()), &make_grid(8, 16).unwrap()).unwrap();
        let b = build_patch(&m, Arc::new(StereographicQuadric::upper_sphere()), &make_grid(8, 32).unwrap()).unwrap();
        assert!(matches!(GluedSurface::new(a, b), Err(Error::Invalid(_))));
    }

    #[test]
    fn non_matching_halves_are_rejected() {
        let m = AmbientMetric::Euclidean;
        let g = make_grid(8, 16).unwrap();
        let a = build_patch(&m, Arc::new(StereographicQuadric::lower_sphere()), &g).unwrap();
        let b = build_patch(&m, Arc::new(crate::surface_patch::Sheared { inner: StereographicQuadric::upper_sphere(), k: 0.3 }), &g)
            .unwrap();
        assert!(GluedSurface::new(a, b).unwrap_err().to_string().contains("boundary mismatch"));
    }

    #[test]
    fn contiguity_frame_is_orthonormal() {
        let g = make_grid(8, 16).unwrap();
        for m in [AmbientMetric::Euclidean, AmbientMetric::DiagPerturbation { epsilon: 0.05 }] {
            let s = build_glued_sphere(&m, &g).unwrap();
            let c = s.contiguity();
            assert!(c.frame_residual(&s) < 1e-10);
        }
    }

    #[test]
    fn tangent_rates_of_a_translation_match() {
        // e₁ restricted to each chart: ȧ = g⁻¹(y_i · e₁) and ċ = n · e₁
        let g = make_grid(8, 16).unwrap();
        let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
        let e = Vec3::new(1.0, 0.0, 0.0);
        let rates = |p: &SurfacePatch| -> (Vec<Complex64>, Vec<f64>) {
            p.boundary
                .iter()
                .map(|q| {
                    let gi = q.g.try_inverse().unwrap();
                    let r = [q.y1.dot(&e), q.y2.dot(&e)];
                    let a1 = gi[(0, 0)] * r[0] + gi[(0, 1)] * r[1];
                    let a2 = gi[(1, 0)] * r[0] + gi[(1, 1)] * r[1];
                    (Complex64::new(a1, -a2), q.n.dot(&e))
                })
                .unzip()
        };
        let (up, cp) = rates(&s.plus);
        let (um, cm) = rates(&s.minus);
        let mm = s.contiguity().mismatch((&up, &cp), (&um, &cm));
        assert!(ContiguityConditions::sup(&mm) < 1e-12);
        // and a dilation of only one chart does not
        let cm2: Vec<f64> = cm.iter().map(|c| c + 1.0).collect();
        assert!(ContiguityConditions::sup(&s.contiguity().mismatch((&up, &cp), (&um, &cm2))) > 0.5);
    }

    #[test]
    fn carleman_identity_with_both_normalizations_is_rigid() {
        let g = make_grid(8, 64).unwrap();
        let u = BoundaryTrace::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let p = CarlemanProblem::new(u.clone(), Some(Complex64::new(0.2, 0.1))).unwrap();
        assert_eq!(p.kappa, 0);
        assert_eq!(solve_carleman(&p, 8, &GapRule::default()).unwrap().dimension, 0);
        let p = CarlemanProblem::new(u, None).unwrap();
        assert_eq!(solve_carleman(&p, 8, &GapRule::default()).unwrap().dimension, 0);
        let two = BoundaryTrace::from_fn(&g, |_| Complex64::new(2.0, 0.0));
        assert_eq!(solve_carleman(&CarlemanProblem::new(two, None).unwrap(), 8, &GapRule::default()).unwrap().dimension, 0);
    }

    #[test]
    fn carleman_rejects_nonzero_index_and_zeros() {
        let g = make_grid(8, 64).unwrap();
        let u = BoundaryTrace::from_fn(&g, |s| Complex64::from_polar(1.0, s));
        let p = CarlemanProblem::new(u, None).unwrap();
        assert!(solve_carleman(&p, 8, &GapRule::default()).is_err());
        let z = BoundaryTrace::from_fn(&g, |s| Complex64::new(s.cos().max(0.0), 0.0));
        assert!(CarlemanProblem::new(z, None).is_err());
    }

    #[test]
    fn zero_rates_give_constant_c_minus() {
        let g = make_grid(8, 16).unwrap();
        let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
        let cp: Vec<f64> = (0..16).map(|j| 0.5 + 0.1 * (j as f64).sin()).collect();
        let mean = cp.iter().sum::<f64>() / 16.0;
        let r = recover_c_minus(
            &s,
            &DiskField::zeros(&g),
            &crate::elliptic_system::Linearized,
            &ChartState::zero(&g),
            0.0,
            &cp,
        )
        .unwrap();
        assert!((r.b1 - mean).abs() < 1e-14);
        assert!(r.c_dot.interior.values.iter().all(|v| (v - mean).abs() < 1e-14));
    }
}
