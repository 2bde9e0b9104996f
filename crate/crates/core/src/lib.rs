//! Numerical machinery for MG-deformations of convex surfaces: discrete complex
//! analysis on the disk, ambient Riemannian geometry, surface patches, the
//! Carleman-Vekua system for the deformation rates, Riemann-Hilbert and
//! transmission solvers, and a time-stepping certifier.

pub mod ambient_metric;
pub mod deformation_flow;
pub mod disk_field;
pub mod elliptic_system;
pub mod error;
pub mod expr;
pub mod gluing;
pub mod linalg;
pub mod rh_solver;
pub mod surface_patch;

pub use error::{Error, Result};
pub use num_complex::Complex64;
