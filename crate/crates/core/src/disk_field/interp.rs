use num_complex::Complex64;

use super::field::{BoundaryTrace, DiskField};

fn trig_interp(row: &[Complex64], theta: f64) -> Complex64 {
    let n = row.len();
    let dt = 2.0 * std::f64::consts::PI / n as f64;
    // spectral coefficients by direct transform; n is small per call site
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        let mi = if 2 * m < n { m as f64 } else if 2 * m == n { 0.0 } else { m as f64 - n as f64 };
        let mut c = Complex64::new(0.0, 0.0);
        for (j, v) in row.iter().enumerate() {
            c += v * Complex64::from_polar(1.0, -(m as f64) * j as f64 * dt);
        }
        c /= n as f64;
        if 2 * m == n {
            acc += c * (n as f64 / 2.0 * theta).cos();
        } else {
            acc += c * Complex64::from_polar(1.0, mi * theta);
        }
    }
    acc
}

/// Value of a nodal field at an arbitrary point of the closed disk: trigonometric
/// interpolation on rings, quintic Lagrange interpolation along the diameter
/// through the point. The boundary trace, when given, is used as the outermost
/// ring at r = 1.
pub fn interpolate(f: &DiskField, boundary: Option<&BoundaryTrace>, z: Complex64) -> Complex64 {
    let grid = &f.grid;
    let na = grid.n_angular;
    let r = z.norm();
    let theta = if r > 0.0 { z.arg() } else { 0.0 };
    // signed abscissae along the diameter: (position, ring, side) with side ±1
    let mut pts: Vec<(f64, Option<usize>, f64)> = Vec::new();
    if boundary.is_some() {
        pts.push((-1.0, None, -1.0));
    }
    for i in (0..grid.n_radial).rev() {
        pts.push((-grid.radii[i], Some(i), -1.0));
    }
    for i in 0..grid.n_radial {
        pts.push((grid.radii[i], Some(i), 1.0));
    }
    if boundary.is_some() {
        pts.push((1.0, None, 1.0));
    }
    let n = pts.len();
    let pos = pts.iter().position(|p| p.0 > r).unwrap_or(n);
    let start = pos.saturating_sub(3).min(n.saturating_sub(6));
    let sel = &pts[start..(start + 6).min(n)];
    let mut xs = Vec::with_capacity(6);
    let mut ys = Vec::with_capacity(6);
    for &(x, ring, side) in sel {
        let ang = if side > 0.0 { theta } else { theta + std::f64::consts::PI };
        let v = match ring {
            Some(i) => trig_interp(&f.values[i * na..(i + 1) * na], ang),
            None => trig_interp(&boundary.expect("boundary ring").values, ang),
        };
        xs.push(x);
        ys.push(v);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..xs.len() {
        let mut l = 1.0;
        for b in 0..xs.len() {
            if a != b {
                l *= (r - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += l * ys[a];
    }
    acc
}
