use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polar tensor-product grid on the closed unit disk.
///
/// Interior nodes sit at midpoint radii `r_i = (i + 1/2) dr` and uniform angles
/// `theta_j = j dtheta`; node `(i, j)` has flat index `i * n_angular + j`.
/// Boundary samples are the same angles at `r = 1`, so `s_j = theta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskGrid {
    pub n_radial: usize,
    pub n_angular: usize,
    pub dr: f64,
    pub dtheta: f64,
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    pub nodes: Vec<Complex64>,
    pub quadrature_weights: Vec<f64>,
    pub boundary_samples: Vec<Complex64>,
}

pub fn make_grid(n_radial: usize, n_angular: usize) -> Result<Arc<DiskGrid>> {
    if n_radial < 4 || n_angular < 8 {
        return Err(Error::invalid(format!(
            "grid too coarse: need n_radial >= 4 and n_angular >= 8, got ({n_radial}, {n_angular})"
        )));
    }
    // reflection through the origin maps angle j to j + n/2
    if n_angular % 2 != 0 {
        return Err(Error::invalid(format!(
            "n_angular must be even, got {n_angular}"
        )));
    }
    let dr = 1.0 / n_radial as f64;
    let dtheta = 2.0 * PI / n_angular as f64;
    let radii: Vec<f64> = (0..n_radial).map(|i| (i as f64 + 0.5) * dr).collect();
    let angles: Vec<f64> = (0..n_angular).map(|j| j as f64 * dtheta).collect();
    let mut nodes = Vec::with_capacity(n_radial * n_angular);
    let mut quadrature_weights = Vec::with_capacity(n_radial * n_angular);
    for &r in &radii {
        for &t in &angles {
            nodes.push(Complex64::from_polar(r, t));
            quadrature_weights.push(r * dr * dtheta);
        }
    }
    let boundary_samples = angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    Ok(Arc::new(DiskGrid {
        n_radial,
        n_angular,
        dr,
        dtheta,
        radii,
        angles,
        nodes,
        quadrature_weights,
        boundary_samples,
    }))
}

impl DiskGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_angular + j
    }

    /// Angle index of the antipodal direction.
    #[inline]
    pub fn opposite(&self, j: usize) -> usize {
        (j + self.n_angular / 2) % self.n_angular
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_samples.len()
    }

    /// Arc parameter of boundary sample `j`.
    pub fn arc_parameter(&self, j: usize) -> f64 {
        self.angles[j]
    }

    /// Index of the node closest to the origin (ring 0, angle 0).
    pub fn base_node(&self) -> usize {
        0
    }

    pub fn same_shape(&self, other: &DiskGrid) -> bool {
        self.n_radial == other.n_radial && self.n_angular == other.n_angular
    }
}
