//! Run configuration: one TOML file per experiment, parsed strictly.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use mgdeform_core::ambient_metric::AmbientMetric;
use mgdeform_core::gluing::Mode;
use mgdeform_core::linalg::GapRule;
use mgdeform_core::Complex64;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveRh,
    Glue,
    Deform,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveRh => "solve-rh",
            Command::Glue => "glue",
            Command::Deform => "deform",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_radial: 64, n_angular: 128 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    Sphere {},
    /// x² + y² + z²/height² = 1.
    Ellipsoid { height: f64 },
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig::Sphere {}
    }
}

impl SurfaceConfig {
    pub fn height(&self) -> f64 {
        match *self {
            SurfaceConfig::Sphere {} => 1.0,
            SurfaceConfig::Ellipsoid { height } => height,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Euclidean {},
    DiagPerturbation { epsilon: f64 },
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::Euclidean {}
    }
}

impl MetricConfig {
    pub fn metric(&self) -> AmbientMetric {
        match *self {
            MetricConfig::Euclidean {} => AmbientMetric::Euclidean,
            MetricConfig::DiagPerturbation { epsilon } => AmbientMetric::DiagPerturbation { epsilon },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Linearized {},
    /// `key = expression` lines in x1, x2, t for n0, n1, n2, q1, q2, e.
    Synthetic { expressions: String },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Linearized {}
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    Free {},
    PointFixed { z0: [f64; 2] },
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig::Free {}
    }
}

impl ModeConfig {
    pub fn mode(&self) -> Mode {
        match *self {
            ModeConfig::Free {} => Mode::Free,
            ModeConfig::PointFixed { z0 } => Mode::PointFixed { z0: Complex64::new(z0[0], z0[1]) },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub dt: f64,
    pub steps: usize,
    /// Family member in the (Re Φ⁺(0), Im Φ⁺(0), B₁⁻) basis.
    pub params: Vec<f64>,
    pub k_constant: f64,
    pub abort_factor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { dt: 1e-2, steps: 1, params: vec![1.0, 0.0, 0.0], k_constant: 10.0, abort_factor: 10.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// GMRES and fixed-point stopping tolerance.
    pub solver: f64,
    pub rank_gap: f64,
    pub rank_threshold: f64,
    pub rank_floor: f64,
    /// Contiguity residual accepted by the closed solve.
    pub residual: f64,
    pub isothermal: f64,
    /// Sup norm below which the point-fixed solution counts as zero in verify.
    pub zero_field: f64,
    /// Bound on k_residual and g_residual in verify.
    pub certification: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver: 1e-11,
            rank_gap: 10.0,
            rank_threshold: 1e-3,
            rank_floor: 1e-6,
            residual: 1e-2,
            isothermal: 0.1,
            zero_field: 1e-6,
            certification: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn gap_rule(&self) -> GapRule {
        GapRule { gap: self.rank_gap, floor: self.rank_floor, threshold: self.rank_threshold }
    }
}

/// Problem for `solve-rh`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhConfig {
    /// A = B = 0, ψ = 0, φ = 0 with λ = e^{i·index·s}.
    Analytic { index: i32 },
    /// Constant A and B with exact solution w* = z or z̄ and λ = e^{is},
    /// pinned by w(0) = w*(0) and Im w(½) = Im w*(½).
    Manufactured { a: f64, b: f64, solution: ExactSolution },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    Z,
    Zbar,
}

impl Default for RhConfig {
    fn default() -> Self {
        RhConfig::Manufactured { a: 1.0, b: 0.0, solution: ExactSolution::Z }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must agree with the command on the command line.
    pub command: Option<Command>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub rh: RhConfig,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&src)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.solver", t.solver),
            ("tolerances.rank_gap", t.rank_gap),
            ("tolerances.rank_threshold", t.rank_threshold),
            ("tolerances.rank_floor", t.rank_floor),
            ("tolerances.residual", t.residual),
            ("tolerances.isothermal", t.isothermal),
            ("tolerances.zero_field", t.zero_field),
            ("tolerances.certification", t.certification),
            ("flow.dt", self.flow.dt),
            ("flow.k_constant", self.flow.k_constant),
            ("flow.abort_factor", self.flow.abort_factor),
        ] {
            positive(name, v)?;
        }
        if self.grid.n_radial < 4 || self.grid.n_angular < 8 {
            return Err(CliError::Validation("grid must have n_radial >= 4 and n_angular >= 8".into()));
        }
        if let SurfaceConfig::Ellipsoid { height } = self.surface {
            positive("surface.height", height)?;
        }
        if let MetricConfig::DiagPerturbation { epsilon } = self.metric {
            if !(epsilon.is_finite() && epsilon > -1.0) {
                return Err(CliError::Validation(format!("metric.epsilon must exceed -1, got {epsilon}")));
            }
        }
        if let ModeConfig::PointFixed { z0 } = self.mode {
            if !(z0[0].hypot(z0[1]) < 1.0) {
                return Err(CliError::Validation("mode.z0 must lie strictly inside the unit disk".into()));
            }
        }
        if self.flow.params.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Validation("flow.params must be finite".into()));
        }
        if let RhConfig::Manufactured { a, b, .. } = self.rh {
            if !(a.is_finite() && b.is_finite()) {
                return Err(CliError::Validation("rh coefficients must be finite".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.grid.n_radial, 64);
        assert!(matches!(c.mode, ModeConfig::Free {}));
        assert_eq!(c.flow.params, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn misspelled_keys_are_rejected() {
        assert!(RunConfig::parse("[flow]\nd_t = 0.1\n").is_err());
        assert!(RunConfig::parse("[grid]\nn_radial = 8\nn_angular = 16\nn_extra = 1\n").is_err());
        assert!(RunConfig::parse("[metric]\nkind = \"euclidean\"\nepsilon = 0.1\n").is_err());
        assert!(RunConfig::parse("[flow]\ndt = \"small\"\n").is_err());
    }

    #[test]
    fn negative_dt_and_outside_points_are_invalid() {
        assert!(RunConfig::parse("[flow]\ndt = -1.0\n").is_err());
        assert!(RunConfig::parse("[tolerances]\nresidual = 0.0\n").is_err());
        assert!(RunConfig::parse("[mode]\nkind = \"point_fixed\"\nz0 = [1.0, 0.0]\n").is_err());
        assert!(RunConfig::parse("[mode]\nkind = \"point_fixed\"\nz0 = [0.3, 0.1]\n").is_ok());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::parse(
            "command = \"glue\"\n[surface]\nkind = \"ellipsoid\"\nheight = 1.2\n\
             [metric]\nkind = \"diag_perturbation\"\nepsilon = 0.05\n\
             [rh]\nkind = \"manufactured\"\na = 0.0\nb = 0.5\nsolution = \"zbar\"\n",
        )
        .unwrap();
        assert_eq!(c.command, Some(Command::Glue));
        assert_eq!(c.surface.height(), 1.2);
        assert!(matches!(c.rh, RhConfig::Manufactured { solution: ExactSolution::Zbar, .. }));
    }
}
