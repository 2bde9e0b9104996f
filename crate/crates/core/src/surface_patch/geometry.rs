use nalgebra::Matrix2;

use super::immersion::Jet;
use crate::ambient_metric::{christoffel, contract, AmbientMetric, Vec3};
use crate::error::{Error, Result};

pub type Mat2 = Matrix2<f64>;

/// Surface quantities at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub y: Vec3,
    pub y1: Vec3,
    pub y2: Vec3,
    pub n: Vec3,
    pub g: Mat2,
    pub b: Mat2,
    pub v: f64,
    pub h: f64,
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    pub area_element: f64,
}

impl PointGeometry {
    pub fn tangent(&self, i: usize) -> Vec3 {
        if i == 0 {
            self.y1
        } else {
            self.y2
        }
    }
}

/// Fundamental forms and curvatures from a jet. `sign` selects the normal
/// orientation relative to the metric-raised cross product of the tangents.
pub fn point_geometry(metric: &AmbientMetric, jet: &Jet, sign: f64) -> Result<PointGeometry> {
    let (y1, y2) = (jet.d1, jet.d2);
    let cross = y1.cross(&y2);
    if cross.norm() <= 1e-12 * (1.0 + y1.norm() * y2.norm()) {
        return Err(Error::geometry("degenerate tangents"));
    }
    let inv = metric.inverse(&jet.y)?;
    let raised = inv * cross;
    let n = raised * (sign / metric.norm(&jet.y, &raised));
    let a = metric.components(&jet.y);
    let gamma = christoffel(metric, &jet.y)?;
    let ip = |u: &Vec3, w: &Vec3| u.dot(&(a * w));
    let g = Mat2::new(ip(&y1, &y1), ip(&y1, &y2), ip(&y2, &y1), ip(&y2, &y2));
    let bij = |dij: &Vec3, yi: &Vec3, yj: &Vec3| ip(&n, &(dij + contract(&gamma, yi, yj)));
    let b12 = bij(&jet.d12, &y1, &y2);
    let b = Mat2::new(bij(&jet.d11, &y1, &y1), b12, b12, bij(&jet.d22, &y2, &y2));
    let det_g = g.determinant();
    if det_g <= 0.0 {
        return Err(Error::geometry("degenerate tangents"));
    }
    let k = b.determinant() / det_g;
    let ginv = Mat2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det_g;
    let h = 0.5 * (ginv[(0, 0)] * b[(0, 0)] + 2.0 * ginv[(0, 1)] * b[(0, 1)] + ginv[(1, 1)] * b[(1, 1)]);
    let disc = (h * h - k).max(0.0).sqrt();
    Ok(PointGeometry {
        y: jet.y,
        y1,
        y2,
        n,
        g,
        b,
        v: 0.5 * (b[(0, 0)] + b[(1, 1)]),
        h,
        k,
        k1: h + disc,
        k2: h - disc,
        area_element: det_g.sqrt(),
    })
}
