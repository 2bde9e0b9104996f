//! Riemannian metrics on coordinate 3-space and parallel transport.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
/// Γ[α][β][γ] = Γ^α_βγ.
pub type Christoffel = [[[f64; 3]; 3]; 3];

/// Radius of the coordinate ball on which `bound_m0` is certified.
pub const CERTIFIED_RADIUS: f64 = 2.0;

/// Closed-form metric catalog with analytic first and second partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmbientMetric {
    Euclidean,
    /// ã = I + ε·diag(0, 0, (y¹)²).
    DiagPerturbation { epsilon: f64 },
}

impl AmbientMetric {
    pub fn components(&self, y: &Vec3) -> Mat3 {
        match *self {
            AmbientMetric::Euclidean => Mat3::identity(),
            AmbientMetric::DiagPerturbation { epsilon } => {
                let mut m = Mat3::identity();
                m[(2, 2)] += epsilon * y[0] * y[0];
                m
            }
        }
    }

    /// d[γ] = ∂_γ ã.
    pub fn first_partials(&self, y: &Vec3) -> [Mat3; 3] {
        let mut d = [Mat3::zeros(); 3];
        if let AmbientMetric::DiagPerturbation { epsilon } = *self {
            d[0][(2, 2)] = 2.0 * epsilon * y[0];
        }
        d
    }

    /// d2[γ][δ] = ∂_γ∂_δ ã.
    pub fn second_partials(&self, _y: &Vec3) -> [[Mat3; 3]; 3] {
        let mut d = [[Mat3::zeros(); 3]; 3];
        if let AmbientMetric::DiagPerturbation { epsilon } = *self {
            d[0][0][(2, 2)] = 2.0 * epsilon;
        }
        d
    }

    /// Cap on the component magnitudes of ã, ∂ã, ∂²ã over the ball of radius
    /// `CERTIFIED_RADIUS`.
    pub fn bound_m0(&self) -> f64 {
        match *self {
            AmbientMetric::Euclidean => 1.0,
            AmbientMetric::DiagPerturbation { epsilon } => {
                let r = CERTIFIED_RADIUS;
                let e = epsilon.abs();
                (1.0 + e * r * r).max(2.0 * e * r).max(2.0 * e)
            }
        }
    }

    /// Largest component magnitude of ã and its partials over the samples.
    pub fn sampled_sup(&self, samples: &[Vec3]) -> f64 {
        let mut m: f64 = 0.0;
        for y in samples {
            m = m.max(self.components(y).amax());
            for d in self.first_partials(y) {
                m = m.max(d.amax());
            }
            for row in self.second_partials(y) {
                for d in row {
                    m = m.max(d.amax());
                }
            }
        }
        m
    }

    pub fn inner(&self, y: &Vec3, u: &Vec3, v: &Vec3) -> f64 {
        u.dot(&(self.components(y) * v))
    }

    pub fn norm(&self, y: &Vec3, u: &Vec3) -> f64 {
        self.inner(y, u, u).sqrt()
    }

    pub fn inverse(&self, y: &Vec3) -> Result<Mat3> {
        let a = self.components(y);
        match a.cholesky() {
            Some(ch) => Ok(ch.inverse()),
            None => Err(Error::geometry(format!(
                "metric is not positive definite at ({:.6}, {:.6}, {:.6})",
                y[0], y[1], y[2]
            ))),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, AmbientMetric::Euclidean)
            || matches!(self, AmbientMetric::DiagPerturbation { epsilon } if *epsilon == 0.0)
    }
}

pub fn christoffel(metric: &AmbientMetric, y: &Vec3) -> Result<Christoffel> {
    let inv = metric.inverse(y)?;
    let d = metric.first_partials(y);
    let mut g = [[[0.0; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in b..3 {
                let mut s = 0.0;
                for e in 0..3 {
                    s += inv[(a, e)] * (d[b][(e, c)] + d[c][(e, b)] - d[e][(b, c)]);
                }
                g[a][b][c] = 0.5 * s;
                g[a][c][b] = 0.5 * s;
            }
        }
    }
    Ok(g)
}

/// Contracts Γ^α_βγ u^β v^γ.
pub fn contract(g: &Christoffel, u: &Vec3, v: &Vec3) -> Vec3 {
    let mut out = Vec3::zeros();
    for a in 0..3 {
        let mut s = 0.0;
        for b in 0..3 {
            for c in 0..3 {
                s += g[a][b][c] * u[b] * v[c];
            }
        }
        out[a] = s;
    }
    out
}

/// A sampled curve u(τ) in coordinate space.
#[derive(Debug, Clone)]
pub struct SpacePath {
    params: Vec<f64>,
    points: Vec<Vec3>,
}

const PATH_STENCIL: usize = 6;

impl SpacePath {
    pub fn new(params: Vec<f64>, points: Vec<Vec3>) -> Result<Self> {
        if params.len() != points.len() {
            return Err(Error::invalid("path parameters and points differ in length"));
        }
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("path parameter must be strictly increasing"));
        }
        Ok(SpacePath { params, points })
    }

    /// Samples `f` at `n + 1` equally spaced parameters on [0, t].
    pub fn from_fn(f: impl Fn(f64) -> Vec3, t: f64, n: usize) -> Result<Self> {
        let params: Vec<f64> = (0..=n).map(|k| t * k as f64 / n as f64).collect();
        let points = params.iter().map(|&s| f(s)).collect();
        SpacePath::new(params, points)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn reversed(&self) -> SpacePath {
        let t_end = *self.params.last().unwrap_or(&0.0);
        let params = self.params.iter().rev().map(|&s| t_end - s).collect();
        let points = self.points.iter().rev().cloned().collect();
        SpacePath { params, points }
    }

    /// Position and velocity at τ from the local Lagrange interpolant through
    /// up to six neighbouring samples.
    pub fn eval(&self, tau: f64, interval: usize) -> (Vec3, Vec3) {
        let n = self.params.len();
        let s = if n <= PATH_STENCIL {
            0
        } else {
            interval.saturating_sub(PATH_STENCIL / 2 - 1).min(n - PATH_STENCIL)
        };
        let e = (s + PATH_STENCIL).min(n);
        let xs = &self.params[s..e];
        let mut pos = Vec3::zeros();
        let mut vel = Vec3::zeros();
        for a in 0..xs.len() {
            let mut l = 1.0;
            let mut dl = 0.0;
            for b in 0..xs.len() {
                if b == a {
                    continue;
                }
                let denom = xs[a] - xs[b];
                // product rule accumulated on the fly
                dl = dl * (tau - xs[b]) / denom + l / denom;
                l *= (tau - xs[b]) / denom;
            }
            pos += self.points[s + a] * l;
            vel += self.points[s + a] * dl;
        }
        (pos, vel)
    }
}

/// Integrates dV/dτ + Γ(u) V u' = 0 along the path with the classical
/// fourth-order Runge-Kutta rule, one step per sample interval.
pub fn parallel_transport(metric: &AmbientMetric, v0: &Vec3, path: &SpacePath) -> Result<Vec3> {
    if path.len() < 2 {
        return Err(Error::invalid("parallel transport needs at least two path samples"));
    }
    if metric.is_flat() {
        return Ok(*v0);
    }
    let rhs = |tau: f64, k: usize, v: &Vec3| -> Result<Vec3> {
        let (u, du) = path.eval(tau, k);
        let g = christoffel(metric, &u)?;
        Ok(-contract(&g, v, &du))
    };
    let mut v = *v0;
    for k in 0..path.len() - 1 {
        let (t0, t1) = (path.params[k], path.params[k + 1]);
        let h = t1 - t0;
        let k1 = rhs(t0, k, &v)?;
        let k2 = rhs(t0 + 0.5 * h, k, &(v + k1 * (0.5 * h)))?;
        let k3 = rhs(t0 + 0.5 * h, k, &(v + k2 * (0.5 * h)))?;
        let k4 = rhs(t1, k, &(v + k3 * h))?;
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::geometry("parallel transport diverged"));
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curved() -> AmbientMetric {
        AmbientMetric::DiagPerturbation { epsilon: 0.1 }
    }

    fn wiggle(t: f64) -> Vec3 {
        Vec3::new(0.5 + t, 0.3 * (2.0 * t).sin(), t * t - 0.2)
    }

    #[test]
    fn euclidean_christoffels_vanish() {
        let g = christoffel(&AmbientMetric::Euclidean, &Vec3::new(0.3, -1.0, 2.0)).unwrap();
        assert!(g.iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn diagonal_perturbation_matches_closed_form() {
        // ã₃₃ = 1 + εy1²: Γ³₁₃ = εy1/(1 + εy1²), Γ¹₃₃ = −εy1, all else zero
        let eps = 0.1;
        let y = Vec3::new(0.7, -0.4, 1.3);
        let g = christoffel(&curved(), &y).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let expect = match (a, b, c) {
                        (2, 0, 2) | (2, 2, 0) => eps * 0.7 / (1.0 + eps * 0.49),
                        (0, 2, 2) => -eps * 0.7,
                        _ => 0.0,
                    };
                    assert!((g[a][b][c] - expect).abs() < 1e-15, "{a}{b}{c}");
                    assert_eq!(g[a][b][c], g[a][c][b]);
                }
            }
        }
    }

    #[test]
    fn euclidean_transport_is_identity() {
        let path = SpacePath::from_fn(wiggle, 1.0, 10).unwrap();
        let v0 = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(parallel_transport(&AmbientMetric::Euclidean, &v0, &path).unwrap(), v0);
    }

    #[test]
    fn transport_is_fourth_order() {
        let v0 = Vec3::new(0.2, -0.5, 1.0);
        let m = AmbientMetric::DiagPerturbation { epsilon: 0.5 };
        let run = |n| parallel_transport(&m, &v0, &SpacePath::from_fn(wiggle, 1.0, n).unwrap()).unwrap();
        let (a, b, c) = (run(10), run(20), run(40));
        let ratio = (a - b).norm() / (b - c).norm();
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn transport_preserves_norm_and_reverses() {
        let m = curved();
        let path = SpacePath::from_fn(wiggle, 1.0, 200).unwrap();
        let v0 = Vec3::new(0.2, -0.5, 1.0);
        let v1 = parallel_transport(&m, &v0, &path).unwrap();
        let n0 = m.inner(&wiggle(0.0), &v0, &v0);
        let n1 = m.inner(&wiggle(1.0), &v1, &v1);
        assert!((n1 - n0).abs() / n0 < 1e-8);
        let back = parallel_transport(&m, &v1, &path.reversed()).unwrap();
        assert!((back - v0).norm() < 1e-8);
    }

    #[test]
    fn short_path_rejected() {
        let path = SpacePath::new(vec![0.0], vec![Vec3::zeros()]).unwrap();
        assert!(parallel_transport(&curved(), &Vec3::x(), &path).is_err());
        assert!(SpacePath::new(vec![0.0, 0.0], vec![Vec3::zeros(); 2]).is_err());
    }

    #[test]
    fn indefinite_metric_is_reported() {
        let m = AmbientMetric::DiagPerturbation { epsilon: -2.0 };
        assert!(christoffel(&m, &Vec3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn bound_covers_samples() {
        let m = AmbientMetric::DiagPerturbation { epsilon: 0.05 };
        let samples: Vec<Vec3> = (0..50).map(|k| wiggle(k as f64 / 50.0)).collect();
        assert!(m.sampled_sup(&samples) <= m.bound_m0());
        assert_eq!(AmbientMetric::Euclidean.sampled_sup(&samples), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn transport_is_metric_compatible(
            eps in 0.0..0.5f64,
            a in prop::array::uniform3(-1.0..1.0f64),
            b in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let m = AmbientMetric::DiagPerturbation { epsilon: eps };
            let path = SpacePath::from_fn(wiggle, 1.0, 100).unwrap();
            let (u, v) = (Vec3::from(a), Vec3::from(b));
            let before = m.inner(&wiggle(0.0), &u, &v);
            let tu = parallel_transport(&m, &u, &path).unwrap();
            let tv = parallel_transport(&m, &v, &path).unwrap();
            let after = m.inner(&wiggle(1.0), &tu, &tv);
            prop_assert!((after - before).abs() < 1e-8 * (1.0 + u.norm() * v.norm()));
        }
    }
}
