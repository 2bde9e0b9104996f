use std::fmt::Debug;

use crate::ambient_metric::Vec3;

/// Value and parameter derivatives of an immersion up to second order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub y: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    pub d11: Vec3,
    pub d12: Vec3,
    pub d22: Vec3,
}

impl Jet {
    pub fn add(&self, o: &Jet) -> Jet {
        Jet {
            y: self.y + o.y,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d11: self.d11 + o.d11,
            d12: self.d12 + o.d12,
            d22: self.d22 + o.d22,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            y: self.y * s,
            d1: self.d1 * s,
            d2: self.d2 * s,
            d11: self.d11 * s,
            d12: self.d12 * s,
            d22: self.d22 * s,
        }
    }

    pub fn zero() -> Jet {
        Jet {
            y: Vec3::zeros(),
            d1: Vec3::zeros(),
            d2: Vec3::zeros(),
            d11: Vec3::zeros(),
            d12: Vec3::zeros(),
            d22: Vec3::zeros(),
        }
    }
}

/// A closed-form map from the parameter disk into coordinate 3-space.
pub trait Immersion: Send + Sync + Debug {
    fn jet(&self, x1: f64, x2: f64) -> Jet;
}

/// The quadric (2x¹, 2x², h(|x|² − 1)) / (1 + |x|²).
///
/// h = 1 is the lower hemisphere of the unit sphere by stereographic
/// projection from the north pole; h = −1 is the upper hemisphere written in
/// the inverted coordinate ζ = 1/z̄; other h give the rotational ellipsoid
/// x² + y² + z²/h² = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereographicQuadric {
    pub height: f64,
}

impl StereographicQuadric {
    pub fn lower_sphere() -> Self {
        StereographicQuadric { height: 1.0 }
    }

    pub fn upper_sphere() -> Self {
        StereographicQuadric { height: -1.0 }
    }

    pub fn ellipsoid(c: f64) -> Self {
        StereographicQuadric { height: c }
    }
}

impl Immersion for StereographicQuadric {
    fn jet(&self, x1: f64, x2: f64) -> Jet {
        let x = [x1, x2];
        let q = 1.0 + x1 * x1 + x2 * x2;
        let u = 1.0 / q;
        let du = [-2.0 * x1 / (q * q), -2.0 * x2 / (q * q)];
        let ddu = |i: usize, j: usize| {
            let d = if i == j { 1.0 } else { 0.0 };
            -2.0 * d / (q * q) + 8.0 * x[i] * x[j] / (q * q * q)
        };
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let h = self.height;
        // Y_a = 2 x_a u for a = 0, 1 and Y_2 = h (1 − 2u)
        let first = |i: usize| {
            Vec3::new(
                2.0 * delta(i, 0) * u + 2.0 * x1 * du[i],
                2.0 * delta(i, 1) * u + 2.0 * x2 * du[i],
                -2.0 * h * du[i],
            )
        };
        let second = |i: usize, j: usize| {
            Vec3::new(
                2.0 * delta(i, 0) * du[j] + 2.0 * delta(j, 0) * du[i] + 2.0 * x1 * ddu(i, j),
                2.0 * delta(i, 1) * du[j] + 2.0 * delta(j, 1) * du[i] + 2.0 * x2 * ddu(i, j),
                -2.0 * h * ddu(i, j),
            )
        };
        Jet {
            y: Vec3::new(2.0 * x1 * u, 2.0 * x2 * u, h * (1.0 - 2.0 * u)),
            d1: first(0),
            d2: first(1),
            d11: second(0, 0),
            d12: second(0, 1),
            d22: second(1, 1),
        }
    }
}

/// An immersion composed with the shear (x¹, x²) ↦ (x¹, x² + k x¹).
#[derive(Debug, Clone)]
pub struct Sheared<I: Immersion> {
    pub inner: I,
    pub k: f64,
}

impl<I: Immersion> Immersion for Sheared<I> {
    fn jet(&self, x1: f64, x2: f64) -> Jet {
        let j = self.inner.jet(x1, x2 + self.k * x1);
        let k = self.k;
        Jet {
            y: j.y,
            d1: j.d1 + j.d2 * k,
            d2: j.d2,
            d11: j.d11 + j.d12 * (2.0 * k) + j.d22 * (k * k),
            d12: j.d12 + j.d22 * k,
            d22: j.d22,
        }
    }
}

/// The map sending the whole disk to one point.
#[derive(Debug, Clone, Copy)]
pub struct ConstantMap(pub Vec3);

impl Immersion for ConstantMap {
    fn jet(&self, _x1: f64, _x2: f64) -> Jet {
        Jet { y: self.0, ..Jet::zero() }
    }
}
