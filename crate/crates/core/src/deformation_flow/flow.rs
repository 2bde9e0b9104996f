use std::io::Write;

use crate::ambient_metric::{parallel_transport, SpacePath, Vec3};
use crate::disk_field::{DiskGrid, RealField};
use crate::error::{Error, Result};
use crate::gluing::{ClosedSystem, GlobalField, GluedSurface, Mode};
use crate::surface_patch::{curvature_of_deformed, deformed_geometry, SurfacePatch};

use super::{ChartState, DeformationState};

/// (ȧ¹, ȧ², ċ) at the nodes of both charts.
#[derive(Debug, Clone)]
pub struct Rates {
    pub plus: [RealField; 3],
    pub minus: [RealField; 3],
}

impl Rates {
    pub fn from_field(f: &GlobalField) -> Self {
        let chart = |c: &crate::gluing::ChartRates| [c.a1_dot(), c.a2_dot(), c.c_dot.interior.clone()];
        Rates { plus: chart(&f.plus), minus: chart(&f.minus) }
    }

    /// Pure normal motion at constant speed on both charts.
    pub fn normal(grid: &std::sync::Arc<DiskGrid>, speed: f64) -> Self {
        let z = RealField::zeros(grid);
        let c = RealField::constant(grid, speed);
        Rates { plus: [z.clone(), z.clone(), c.clone()], minus: [z.clone(), z, c] }
    }

    fn chart(&self, i: usize) -> &[RealField; 3] {
        if i == 0 {
            &self.plus
        } else {
            &self.minus
        }
    }
}

/// Solver data of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dimension: usize,
    pub transmission_residual: f64,
    /// Closed-problem solves spent on the step.
    pub solves: usize,
}

fn axpy(x: &RealField, a: f64, y: &RealField) -> RealField {
    x.zip_map(y, |p, q| p + a * q)
}

/// State advanced by Σ w_k · rates_k over the charts, with z rebuilt from the
/// ansatz and the rates set to the averaged increment.
fn advance(
    glued: &GluedSurface,
    state: &DeformationState,
    stages: &[(f64, &Rates)],
    dt: f64,
    record: bool,
) -> DeformationState {
    let patches = [&glued.plus, &glued.minus];
    let charts: Vec<ChartState> = (0..2)
        .map(|i| {
            let s = state.chart(i);
            let mut f = [s.a1.clone(), s.a2.clone(), s.c.clone()];
            let mut rate = [RealField::zeros(&s.a1.grid), RealField::zeros(&s.a1.grid), RealField::zeros(&s.a1.grid)];
            for (w, r) in stages {
                for k in 0..3 {
                    f[k] = axpy(&f[k], w * dt, &r.chart(i)[k]);
                    rate[k] = axpy(&rate[k], *w, &r.chart(i)[k]);
                }
            }
            let [a1, a2, c] = f;
            let [a1_dot, a2_dot, c_dot] = rate;
            let mut out = ChartState { a1, a2, c, z: Vec::new(), a1_dot, a2_dot, c_dot };
            out.z = out.ansatz_displacement(patches[i]);
            out
        })
        .collect();
    let [plus, minus]: [ChartState; 2] = charts.try_into().expect("two charts");
    let t = state.t + dt;
    let mut history = state.history.clone();
    if record {
        history.push((t, plus.z.clone(), minus.z.clone()));
    }
    DeformationState { t, plus, minus, history }
}

/// One explicit step with prescribed rates, for controls that are not
/// solutions of the rate problem.
pub fn step_with_rates(glued: &GluedSurface, state: &DeformationState, rates: &Rates, dt: f64) -> Result<DeformationState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    Ok(advance(glued, state, &[(1.0, rates)], dt, true))
}

/// Classical fourth-order Runge-Kutta step of the rate problem, following the
/// family member `params` in the given mode.
pub fn step(
    system: &ClosedSystem,
    state: &DeformationState,
    dt: f64,
    mode: Mode,
    params: &[f64],
) -> Result<(DeformationState, StepReport)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let glued = &system.glued;
    let mut report = StepReport { dimension: 0, transmission_residual: 0.0, solves: 0 };
    let mut rates_at = |s: &DeformationState| -> Result<Rates> {
        let sol = system.solve([&s.plus, &s.minus], s.t, mode)?;
        report.dimension = sol.dimension;
        report.transmission_residual = report.transmission_residual.max(sol.transmission_residual);
        report.solves += 1;
        Ok(Rates::from_field(&sol.member(params)?))
    };
    let k1 = rates_at(state)?;
    if system.provider.is_trivial() {
        // rates do not depend on the state or on t
        return Ok((advance(glued, state, &[(1.0, &k1)], dt, true), report));
    }
    let s2 = advance(glued, state, &[(0.5, &k1)], dt, false);
    let k2 = rates_at(&s2)?;
    let s3 = advance(glued, state, &[(0.5, &k2)], dt, false);
    let k3 = rates_at(&s3)?;
    let s4 = advance(glued, state, &[(1.0, &k3)], dt, false);
    let k4 = rates_at(&s4)?;
    let w = 1.0 / 6.0;
    let next = advance(glued, state, &[(w, &k1), (2.0 * w, &k2), (2.0 * w, &k3), (w, &k4)], dt, true);
    Ok((next, report))
}

/// max over both charts of |K(t) − K(0)| at the nodes, from the geometry of
/// y + z recomputed from scratch.
pub fn k_residual(glued: &GluedSurface, state: &DeformationState) -> Result<f64> {
    let mut r: f64 = 0.0;
    for (patch, s) in [(&glued.plus, &state.plus), (&glued.minus, &state.minus)] {
        if s.z.iter().all(|v| v.norm() == 0.0) {
            continue;
        }
        let k = curvature_of_deformed(patch, &s.z)?;
        for (kt, p) in k.values.iter().zip(&patch.nodes) {
            r = r.max((kt - p.k).abs());
        }
    }
    Ok(r)
}

const G_SAMPLE_STRIDE: usize = 8;

fn chart_g_residual(patch: &SurfacePatch, history: &[(f64, &Vec<Vec3>)]) -> Result<f64> {
    let (_, z_end) = history[history.len() - 1];
    let deformed = deformed_geometry(patch, z_end)?;
    let params: Vec<f64> = history.iter().map(|h| h.0).collect();
    let mut r: f64 = 0.0;
    for k in (0..patch.grid.len()).step_by(G_SAMPLE_STRIDE) {
        let y = patch.nodes[k].y;
        let path = SpacePath::new(params.clone(), history.iter().map(|h| y + h.1[k]).collect())?;
        let n = parallel_transport(&patch.metric, &patch.nodes[k].n, &path)?;
        let end = y + z_end[k];
        r = r.max(patch.metric.norm(&end, &(n - deformed[k].n)));
    }
    Ok(r)
}

/// Largest ã-norm gap between the initial normal carried in parallel along
/// each sampled node's trajectory and the deformed normal at time t.
pub fn g_residual(glued: &GluedSurface, state: &DeformationState) -> Result<f64> {
    if state.history.len() < 2 {
        return Ok(0.0);
    }
    let plus: Vec<(f64, &Vec<Vec3>)> = state.history.iter().map(|h| (h.0, &h.1)).collect();
    let minus: Vec<(f64, &Vec<Vec3>)> = state.history.iter().map(|h| (h.0, &h.2)).collect();
    Ok(chart_g_residual(&glued.plus, &plus)?.max(chart_g_residual(&glued.minus, &minus)?))
}

/// Diagnostics after one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDiagnostics {
    pub step: usize,
    pub t: f64,
    pub k_residual: f64,
    pub g_residual: f64,
    pub contiguity_residual: f64,
    pub report: StepReport,
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub dt: f64,
    pub steps: usize,
    pub mode: Mode,
    pub params: Vec<f64>,
    /// Expected K drift is `k_constant · t²`.
    pub k_constant: f64,
    /// The flow stops once the K drift exceeds this multiple of the
    /// expected drift.
    pub abort_factor: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { dt: 1e-2, steps: 1, mode: Mode::Free, params: vec![1.0, 0.0, 0.0], k_constant: 10.0, abort_factor: 10.0 }
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub state: DeformationState,
    pub diagnostics: Vec<FlowDiagnostics>,
    /// Set when the K drift tripped the abort threshold; the state is the
    /// last accepted one.
    pub tripped: bool,
    /// Last accepted time.
    pub t0: f64,
}

impl FlowOutcome {
    /// `step,t,k_residual,g_residual,contiguity_residual` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,t,k_residual,g_residual,contiguity_residual")?;
        for d in &self.diagnostics {
            writeln!(
                out,
                "{},{:.11e},{:.11e},{:.11e},{:.11e}",
                d.step, d.t, d.k_residual, d.g_residual, d.contiguity_residual
            )?;
        }
        Ok(())
    }
}

/// Repeated steps with diagnostics and the abort rule.
#[derive(Debug, Clone)]
pub struct Flow {
    pub system: ClosedSystem,
    pub opts: FlowOptions,
}

impl Flow {
    pub fn run(&self) -> Result<FlowOutcome> {
        let glued = &self.system.glued;
        let mut state = DeformationState::initial(glued.grid());
        let mut diagnostics = Vec::new();
        for n in 1..=self.opts.steps {
            let (next, report) = step(&self.system, &state, self.opts.dt, self.opts.mode, &self.opts.params)?;
            let k = k_residual(glued, &next)?;
            let g = g_residual(glued, &next)?;
            let bound = self.opts.k_constant * next.t * next.t;
            if k > self.opts.abort_factor * bound {
                let t0 = state.t;
                return Ok(FlowOutcome { state, diagnostics, tripped: true, t0 });
            }
            diagnostics.push(FlowDiagnostics {
                step: n,
                t: next.t,
                k_residual: k,
                g_residual: g,
                contiguity_residual: report.transmission_residual,
                report,
            });
            state = next;
        }
        let t0 = state.t;
        Ok(FlowOutcome { state, diagnostics, tripped: false, t0 })
    }
}
