//! Immersed disks: fundamental forms, curvatures, unit normals, and the
//! conjugate-isothermal check.

mod geometry;
mod immersion;
mod patch;

pub use geometry::{point_geometry, Mat2, PointGeometry};
pub use immersion::{ConstantMap, Immersion, Jet, Sheared, StereographicQuadric};
pub use patch::{
    build_oriented, build_patch, conjugate_isothermal_residual, curvature_of_deformed, deformed_geometry,
    displacement_jets, write_obj, SurfacePatch,
};
