use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use serde::Serialize;

use mgdeform_core::deformation_flow::{ChartState, Flow, FlowOptions, FlowOutcome};
use mgdeform_core::disk_field::{make_grid, BoundaryTrace, DiskField, DiskGrid};
use mgdeform_core::elliptic_system::{CoefficientProvider, Linearized, Synthetic};
use mgdeform_core::gluing::{build_glued_quadric, ClosedOptions, ClosedSolution, ClosedSystem, Mode};
use mgdeform_core::linalg::GmresOptions;
use mgdeform_core::rh_solver::{self, compute_index, homogeneous_family, PointConstraint, RHProblem, SolveOptions};
use mgdeform_core::surface_patch::write_obj;
use mgdeform_core::Complex64;

use crate::config::{Command, ExactSolution, ModeConfig, ProviderConfig, RhConfig, RunConfig};
use crate::report::{emit_report, nums, Num, OutputDir, Status};
use crate::CliError;

pub const REPORT_NAME: &str = "report.json";
pub const FLOW_LOG_NAME: &str = "flow.csv";

fn grid(cfg: &RunConfig) -> Result<Arc<DiskGrid>, CliError> {
    Ok(make_grid(cfg.grid.n_radial, cfg.grid.n_angular)?)
}

fn provider(cfg: &RunConfig) -> Result<Arc<dyn CoefficientProvider>, CliError> {
    Ok(match &cfg.provider {
        ProviderConfig::Linearized {} => Arc::new(Linearized),
        ProviderConfig::Synthetic { expressions } => Arc::new(Synthetic::parse(expressions)?),
    })
}

fn closed_system(cfg: &RunConfig) -> Result<ClosedSystem, CliError> {
    let g = grid(cfg)?;
    let glued = build_glued_quadric(&cfg.metric.metric(), &g, cfg.surface.height())?;
    let tol = &cfg.tolerances;
    let opts = ClosedOptions {
        gap: tol.gap_rule(),
        contiguity_tol: tol.residual,
        isothermal_tol: tol.isothermal,
        gmres: GmresOptions { tol: tol.solver, ..GmresOptions::default() },
        ..ClosedOptions::default()
    };
    Ok(ClosedSystem::new(glued, provider(cfg)?, opts)?)
}

fn solve_at_rest(system: &ClosedSystem, mode: Mode) -> Result<ClosedSolution, CliError> {
    let zero = ChartState::zero(system.glued.grid());
    Ok(system.solve([&zero, &zero], 0.0, mode)?)
}

#[derive(Debug, Serialize)]
pub struct RhReport {
    pub problem: &'static str,
    pub index: i64,
    pub family_dimension: usize,
    pub singular_values: Vec<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior_residual: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_residual: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_contraction: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

fn unit_trace(g: &Arc<DiskGrid>, n: f64) -> BoundaryTrace {
    BoundaryTrace::from_fn(g, |s| Complex64::from_polar(1.0, n * s))
}

pub fn solve_rh(cfg: &RunConfig) -> Result<RhReport, CliError> {
    let g = grid(cfg)?;
    let opts = SolveOptions { tol: cfg.tolerances.solver, gap: cfg.tolerances.gap_rule(), ..SolveOptions::default() };
    match cfg.rh {
        RhConfig::Analytic { index } => {
            let lambda = unit_trace(&g, index as f64);
            let fam = homogeneous_family(&RHProblem::analytic(lambda.clone())?, &opts)?;
            Ok(RhReport {
                problem: "analytic",
                index: compute_index(&lambda)?,
                family_dimension: fam.dimension,
                singular_values: nums(&fam.singular_values),
                relative_error: None,
                interior_residual: None,
                boundary_residual: None,
                max_contraction: None,
                iterations: None,
            })
        }
        RhConfig::Manufactured { a, b, solution } => {
            let (w_star, dbar_w): (fn(Complex64) -> Complex64, f64) = match solution {
                ExactSolution::Z => (|z| z, 0.0),
                ExactSolution::Zbar => (|z: Complex64| z.conj(), 1.0),
            };
            let exact = DiskField::from_fn(&g, w_star);
            let psi = DiskField::from_fn(&g, |z| dbar_w + a * w_star(z) + b * w_star(z).conj());
            let lambda = unit_trace(&g, 1.0);
            let phi = g.boundary_samples.iter().map(|&z| (Complex64::from_polar(1.0, -z.arg()) * w_star(z)).re).collect();
            let zero = Complex64::new(0.0, 0.0);
            let half = Complex64::new(0.5, 0.0);
            let [c1, c2] = PointConstraint::pin(zero, w_star(zero));
            let c3 = PointConstraint { z: half, direction: Complex64::i(), value: w_star(half).im };
            let constant = |v: f64| DiskField::from_fn(&g, |_| Complex64::new(v, 0.0));
            let p = RHProblem::new(constant(a), constant(b), psi, lambda.clone(), phi)?
                .with_constraint(c1)?
                .with_constraint(c2)?
                .with_constraint(c3)?;
            let s = rh_solver::solve(&p, &opts)?;
            Ok(RhReport {
                problem: "manufactured",
                index: compute_index(&lambda)?,
                family_dimension: s.family.len(),
                singular_values: Vec::new(),
                relative_error: Some(Num(s.w.sub(&exact).sup_norm() / exact.sup_norm())),
                interior_residual: Some(Num(s.interior_residual)),
                boundary_residual: Some(Num(s.boundary_residual)),
                max_contraction: Some(Num(s.contraction_history.iter().copied().fold(0.0, f64::max))),
                iterations: Some(s.iterations),
            })
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Mismatch {
    pub position: Num,
    pub normal: Num,
    pub curvature: Num,
}

#[derive(Debug, Serialize)]
pub struct SingularValues {
    pub free: Vec<Num>,
    pub fixed: Vec<Num>,
}

#[derive(Debug, Serialize)]
pub struct GlueReport {
    pub free_dimension: usize,
    pub fixed_dimension: usize,
    pub fixed_sup_norm: Num,
    pub z0: [Num; 2],
    /// Largest contiguity residual of the two solves.
    pub transmission_residual: Num,
    pub b1_minus: Num,
    pub canonical_basis: bool,
    pub singular_values: SingularValues,
    pub gamma_mismatch: Mismatch,
}

/// z₀ of the point-fixed solve: the configured one, else the origin.
fn fixed_point(cfg: &RunConfig) -> Complex64 {
    match cfg.mode {
        ModeConfig::PointFixed { z0 } => Complex64::new(z0[0], z0[1]),
        ModeConfig::Free {} => Complex64::new(0.0, 0.0),
    }
}

pub fn glue_with(system: &ClosedSystem, z0: Complex64) -> Result<GlueReport, CliError> {
    let free = solve_at_rest(system, Mode::Free)?;
    let fixed = solve_at_rest(system, Mode::PointFixed { z0 })?;
    let m = &system.glued.mismatch;
    Ok(GlueReport {
        free_dimension: free.dimension,
        fixed_dimension: fixed.dimension,
        fixed_sup_norm: Num(fixed.particular.sup_norm()),
        z0: [Num(z0.re), Num(z0.im)],
        transmission_residual: Num(free.transmission_residual.max(fixed.transmission_residual)),
        b1_minus: Num(free.b1_minus),
        canonical_basis: free.canonical,
        singular_values: SingularValues { free: nums(&free.singular_values), fixed: nums(&fixed.singular_values) },
        gamma_mismatch: Mismatch { position: Num(m.position), normal: Num(m.normal), curvature: Num(m.curvature) },
    })
}

#[derive(Debug, Serialize)]
pub struct DeformReport {
    pub mode: &'static str,
    pub params: Vec<Num>,
    pub dt: Num,
    pub steps_requested: usize,
    pub steps_accepted: usize,
    pub tripped: bool,
    pub t0: Num,
    pub family_dimension: Option<usize>,
    pub k_residual: Num,
    pub g_residual: Num,
    pub contiguity_residual: Num,
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Free => "free",
        Mode::PointFixed { .. } => "point_fixed",
    }
}

fn flow_with(system: ClosedSystem, cfg: &RunConfig, mode: Mode) -> Result<(FlowOutcome, DeformReport, ClosedSystem), CliError> {
    let f = &cfg.flow;
    let opts = FlowOptions {
        dt: f.dt,
        steps: f.steps,
        mode,
        params: f.params.clone(),
        k_constant: f.k_constant,
        abort_factor: f.abort_factor,
    };
    let flow = Flow { system, opts };
    let out = flow.run()?;
    let last = out.diagnostics.last();
    let report = DeformReport {
        mode: mode_name(mode),
        params: nums(&f.params),
        dt: Num(f.dt),
        steps_requested: f.steps,
        steps_accepted: out.diagnostics.len(),
        tripped: out.tripped,
        t0: Num(out.t0),
        family_dimension: last.map(|d| d.report.dimension),
        k_residual: Num(last.map_or(0.0, |d| d.k_residual)),
        g_residual: Num(last.map_or(0.0, |d| d.g_residual)),
        contiguity_residual: Num(out.diagnostics.iter().map(|d| d.contiguity_residual).fold(0.0, f64::max)),
    };
    Ok((out, report, flow.system))
}

fn write_flow_files(out_dir: &OutputDir, system: &ClosedSystem, outcome: &FlowOutcome) -> Result<(), CliError> {
    outcome.write_csv(BufWriter::new(File::create(out_dir.file(FLOW_LOG_NAME))?))?;
    let glued = &system.glued;
    for (name, patch, chart) in [("plus.obj", &glued.plus, &outcome.state.plus), ("minus.obj", &glued.minus, &outcome.state.minus)] {
        let pts: Vec<_> = patch.nodes.iter().zip(&chart.z).map(|(p, z)| p.y + z).collect();
        write_obj(&patch.grid, &pts, None, BufWriter::new(File::create(out_dir.file(name))?))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: Num,
    pub bound: Num,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub glue: GlueReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<DeformReport>,
}

fn check(name: &'static str, value: f64, bound: f64, passed: bool) -> Check {
    Check { name, passed, value: Num(value), bound: Num(bound) }
}

/// Solves both modes, follows the configured free-mode family member for
/// `flow.steps` steps, and checks the results against the tolerances.
pub fn verify(cfg: &RunConfig, out_dir: &OutputDir) -> Result<VerifyReport, CliError> {
    let system = closed_system(cfg)?;
    let glue = glue_with(&system, fixed_point(cfg))?;
    let tol = &cfg.tolerances;
    let mut checks = vec![
        check("free_dimension", glue.free_dimension as f64, 3.0, glue.free_dimension == 3),
        check("fixed_dimension", glue.fixed_dimension as f64, 0.0, glue.fixed_dimension == 0),
        check("fixed_sup_norm", glue.fixed_sup_norm.0, tol.zero_field, glue.fixed_sup_norm.0 <= tol.zero_field),
        check(
            "transmission_residual",
            glue.transmission_residual.0,
            tol.residual,
            glue.transmission_residual.0 <= tol.residual,
        ),
    ];
    let flow = if cfg.flow.steps > 0 {
        let (outcome, report, system) = flow_with(system, cfg, Mode::Free)?;
        write_flow_files(out_dir, &system, &outcome)?;
        let b = tol.certification;
        checks.push(check("flow_completed", report.steps_accepted as f64, cfg.flow.steps as f64, !report.tripped));
        checks.push(check("k_residual", report.k_residual.0, b, report.k_residual.0 <= b));
        checks.push(check("g_residual", report.g_residual.0, b, report.g_residual.0 <= b));
        Some(report)
    } else {
        None
    };
    Ok(VerifyReport { passed: checks.iter().all(|c| c.passed), checks, glue, flow })
}

/// Runs `command` and writes its artifacts into `out_dir`. The returned
/// status is also recorded in the report.
pub fn execute(command: Command, cfg: &RunConfig, out_dir: &OutputDir) -> Result<Status, CliError> {
    let path = out_dir.file(REPORT_NAME);
    let name = command.name();
    let written = match command {
        Command::SolveRh => solve_rh(cfg).map(|r| emit_report(&path, name, Status::Ok, None, Some(&r))),
        Command::Glue => closed_system(cfg)
            .and_then(|s| glue_with(&s, fixed_point(cfg)))
            .map(|r| emit_report(&path, name, Status::Ok, None, Some(&r))),
        Command::Deform => closed_system(cfg).and_then(|s| {
            let (outcome, report, system) = flow_with(s, cfg, cfg.mode.mode())?;
            write_flow_files(out_dir, &system, &outcome)?;
            Ok(emit_report(&path, name, Status::Ok, None, Some(&report)))
        }),
        Command::Verify => verify(cfg, out_dir).map(|r| {
            let status = if r.passed { Status::Ok } else { Status::AcceptanceViolation };
            emit_report(&path, name, status, None, Some(&r))
        }),
    };
    match written {
        Ok(status) => status,
        Err(CliError::Solver(msg)) => {
            emit_report::<()>(&path, name, Status::SolverFailure, Some(&msg), None)?;
            Err(CliError::Solver(msg))
        }
        Err(e) => Err(e),
    }
}
