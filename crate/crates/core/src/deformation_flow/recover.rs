use std::sync::Arc;

use crate::disk_field::{integrate_angular_then_radial, integrate_radial_then_angular, DiskField, OneForm, Potential};
use crate::elliptic_system::{CoefficientProvider, RateForms};
use crate::error::{Error, Result};
use crate::surface_patch::SurfacePatch;

use super::ChartState;

/// ċ along the canonical path, and the largest difference to the
/// angular-then-radial path.
#[derive(Debug, Clone)]
pub struct CDotRecovery {
    pub c_dot: Potential,
    pub path_difference: f64,
}

/// ċ from u = ȧ¹ − iȧ² by integrating the ċ-gradient of the G-condition
/// from the node nearest the origin. Fails when the two paths disagree by
/// more than `path_tol`.
pub fn recover_c_dot(
    patch: &Arc<SurfacePatch>,
    u: &DiskField,
    provider: &dyn CoefficientProvider,
    state: &ChartState,
    t: f64,
    path_tol: f64,
) -> Result<CDotRecovery> {
    let forms = RateForms::new(patch.clone(), provider, state.clone(), t)?;
    let (mut w1, mut w2) = forms.linear_form(u)?;
    if let Some((s1, s2)) = forms.source_form()? {
        w1 = w1.zip_map(&s1, |a, b| a + b);
        w2 = w2.zip_map(&s2, |a, b| a + b);
    }
    let form = OneForm { w1, w2, boundary: None };
    let a = integrate_radial_then_angular(&form);
    let b = integrate_angular_then_radial(&form);
    let diff = a
        .interior
        .values
        .iter()
        .zip(&b.interior.values)
        .chain(a.boundary.iter().zip(&b.boundary))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if !(diff <= path_tol) {
        return Err(Error::solver(format!(
            "c_dot line integral is path dependent: paths differ by {diff:.3e} (tolerance {path_tol:.1e})"
        )));
    }
    Ok(CDotRecovery { c_dot: a, path_difference: diff })
}
