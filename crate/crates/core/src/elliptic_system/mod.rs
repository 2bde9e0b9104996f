//! The first-order system for the rate fields: the curl equation from the
//! G-condition, the linearized K-preservation equation, and their complex
//! Carleman–Vekua form ∂_z̄u + Au + Bū + E(u) = Ψ̇.

mod assemble;
mod chart;
mod linearize;
mod provider;

pub use assemble::{assemble_complex, compute_pk, compute_psi1_dot, SystemCoefficients};
pub use chart::{ChartCoefficients, ChartResponse, ChartSystem, RateForms};
pub use linearize::{linearize_k, KCoefficients, Probe, Stencil};
pub use provider::{CoefficientProvider, Linearized, ProviderTerms, Sampled, Synthetic};

use num_complex::Complex64;

use crate::disk_field::{DiskField, DiskGrid};
use std::sync::Arc;

/// Largest ratio ‖E(u) − E(v)‖∞ / ‖u − v‖∞ over a fixed family of test
/// fields; the measured stand-in for the Lipschitz constant of E at time t.
pub fn measured_lipschitz(provider: &dyn CoefficientProvider, grid: &Arc<DiskGrid>, t: f64) -> f64 {
    let mut fields = Vec::new();
    for k in 0..4 {
        for c in [Complex64::new(1.0, 0.0), Complex64::i()] {
            fields.push(DiskField::from_fn(grid, |z| c * z.powu(k)));
            fields.push(DiskField::from_fn(grid, |z| c * z.conj().powu(k + 1)));
        }
    }
    let mut worst: f64 = 0.0;
    for (i, u) in fields.iter().enumerate() {
        for v in &fields[i + 1..] {
            let d = u.sub(v).sup_norm();
            if d > 0.0 {
                let de = provider.e_term(u, t).sub(&provider.e_term(v, t)).sup_norm();
                worst = worst.max(de / d);
            }
        }
    }
    worst
}
