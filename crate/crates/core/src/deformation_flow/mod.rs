//! Time integration of the deformation and certification of the
//! MG-conditions along the way.

mod flow;
mod recover;
mod state;

pub use flow::{
    g_residual, k_residual, step, step_with_rates, Flow, FlowDiagnostics, FlowOptions, FlowOutcome, Rates, StepReport,
};
pub use recover::{recover_c_dot, CDotRecovery};
pub use state::{ChartState, DeformationState};
