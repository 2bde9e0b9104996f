use std::sync::Arc;

use num_complex::Complex64;

use super::field::DiskField;
use super::grid::DiskGrid;
use crate::error::{Error, Result};

/// Monomials 1, z, …, z^degree sampled on the grid.
pub fn analytic_basis(grid: &Arc<DiskGrid>, degree: usize) -> Result<Vec<DiskField>> {
    if degree > grid.n_angular / 4 {
        return Err(Error::invalid(format!(
            "degree {degree} exceeds the resolvable bound n_angular/4 = {}",
            grid.n_angular / 4
        )));
    }
    Ok((0..=degree).map(|k| DiskField::from_fn(grid, |z| z.powu(k as u32))).collect())
}

/// Evaluates Σ_k coeffs[k] z^k by Horner's rule.
pub fn eval_poly(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}
