//! Discrete complex analysis on the closed unit disk.

mod analytic;
mod field;
mod grid;
mod integrate;
mod interp;
mod pompeiu;
mod stencil;

pub use analytic::{analytic_basis, eval_poly};
pub use field::{BoundaryTrace, DiskField, RealField};
pub use grid::{make_grid, DiskGrid};
pub use integrate::{
    cumulative_integral, extrapolate, integrate_angular_then_radial, integrate_radial_then_angular,
    periodic_cumulative, OneForm, Potential,
};
pub use interp::interpolate;
pub use pompeiu::{t_operator, PompeiuOperator};
pub use stencil::{dbar, dz, gradient, hessian, partials, second_partials};

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_counts_and_area() {
        let g = make_grid(4, 8).unwrap();
        assert_eq!(g.len(), 32);
        assert_eq!(g.n_boundary(), 8);
        let g = make_grid(64, 128).unwrap();
        let area: f64 = g.quadrature_weights.iter().sum();
        assert!((area - PI).abs() / PI < 1e-6);
        assert!(g.nodes.iter().all(|z| z.norm() <= 1.0 + 1e-12));
        assert!(g.angles.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn coarse_grid_rejected() {
        let err = make_grid(2, 8).unwrap_err();
        assert!(err.to_string().contains("grid too coarse"));
        assert!(make_grid(8, 9).is_err());
    }

    #[test]
    fn dbar_of_simple_functions() {
        let g = make_grid(32, 64).unwrap();
        let z = DiskField::from_fn(&g, |z| z);
        assert!(dbar(&z).unwrap().sup_norm() < 1e-5);
        let zb = DiskField::from_fn(&g, |z| z.conj());
        let d = dbar(&zb).unwrap();
        assert!(d.values.iter().all(|v| (v - 1.0).norm() < 1e-5));
    }

    #[test]
    fn dbar_of_zbar_squared_is_second_order() {
        // ∂_z̄ z̄² = 2z̄; the error must fall by ~4 per refinement
        let err = |n: usize| {
            let g = make_grid(n, 2 * n).unwrap();
            let f = DiskField::from_fn(&g, |z| z.conj() * z.conj());
            let d = dbar(&f).unwrap();
            d.values
                .iter()
                .zip(&g.nodes)
                .fold(0.0f64, |m, (v, z)| m.max((v - 2.0 * z.conj()).norm()))
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < 1e-2);
        assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn dbar_rejects_coarse_grid() {
        let g = make_grid(4, 8).unwrap();
        assert!(dbar(&DiskField::zeros(&g)).is_err());
    }

    #[test]
    fn dz_and_second_partials_on_polynomials() {
        let g = make_grid(32, 64).unwrap();
        let f = DiskField::from_fn(&g, |z| z * z);
        let d = dz(&f).unwrap();
        for (v, z) in d.values.iter().zip(&g.nodes) {
            assert!((v - 2.0 * z).norm() < 1e-4);
        }
        // x1² x2 has ∂₁₁ = 2x2, ∂₁₂ = 2x1, ∂₂₂ = 0
        let f = DiskField::from_fn(&g, |z| c(z.re * z.re * z.im, 0.0));
        let [xx, xy, yy] = second_partials(&f).unwrap();
        for (k, z) in g.nodes.iter().enumerate() {
            assert!((xx.values[k].re - 2.0 * z.im).abs() < 1e-2);
            assert!((xy.values[k].re - 2.0 * z.re).abs() < 1e-2, "{k} {} {}", xy.values[k].re, 2.0 * z.re);
            assert!(yy.values[k].re.abs() < 1e-2);
        }
    }

    #[test]
    fn t_of_zero_is_zero() {
        let g = make_grid(8, 16).unwrap();
        assert_eq!(t_operator(&DiskField::zeros(&g)).sup_norm(), 0.0);
    }

    #[test]
    fn t_of_one_is_zbar() {
        let g = make_grid(32, 64).unwrap();
        let t = t_operator(&DiskField::from_fn(&g, |_| c(1.0, 0.0)));
        let err = t.values.iter().zip(&g.nodes).fold(0.0f64, |m, (v, z)| m.max((v - z.conj()).norm()));
        assert!(err < 5e-3, "err {err}");
    }

    #[test]
    fn t_boundary_and_point_evaluation_match_closed_forms() {
        let g = make_grid(32, 64).unwrap();
        let op = PompeiuOperator::new(&g);
        let one = DiskField::from_fn(&g, |_| c(1.0, 0.0));
        let tb = op.boundary_trace(&one);
        for (v, z) in tb.values.iter().zip(&g.boundary_samples) {
            assert!((v - z.conj()).norm() < 1e-12);
        }
        // T(ζ̄) = z̄²/2 with no analytic part
        let zb = DiskField::from_fn(&g, |z| z.conj());
        let p = c(0.3, -0.2);
        let v = op.eval_at(&zb, p);
        assert!((v - p.conj() * p.conj() / 2.0).norm() < 1e-3);
        assert!(op.eval_at(&one, c(0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn analytic_basis_sizes_and_residual() {
        let g = make_grid(64, 128).unwrap();
        assert_eq!(analytic_basis(&g, 0).unwrap().len(), 1);
        let b = analytic_basis(&g, 2).unwrap();
        assert_eq!(b.len(), 3);
        for f in &b {
            assert!(dbar(f).unwrap().sup_norm() <= 1e-3);
        }
        assert!(analytic_basis(&g, 33).is_err());
    }

    #[test]
    fn interpolation_reproduces_smooth_fields() {
        let g = make_grid(32, 64).unwrap();
        let f = DiskField::from_fn(&g, |z| z * z.conj() + z.powu(3) - c(0.5, 1.0));
        let exact = |z: Complex64| z * z.conj() + z.powu(3) - c(0.5, 1.0);
        for p in [c(0.0, 0.0), c(0.4, -0.3), c(-0.7, 0.6), c(0.05, 0.01)] {
            assert!((interpolate(&f, None, p) - exact(p)).norm() < 1e-9, "{p}");
        }
        let b = BoundaryTrace::from_fn(&g, |s| exact(Complex64::from_polar(1.0, s)));
        let p = Complex64::from_polar(0.995, 1.0);
        assert!((interpolate(&f, Some(&b), p) - exact(p)).norm() < 1e-9);
    }

    #[test]
    fn cumulative_integral_is_exact_for_quintics() {
        let xs: Vec<f64> = (0..20).map(|k| -1.0 + 0.1 * k as f64 + 0.01 * (k % 3) as f64).collect();
        let f = |x: f64| 1.0 + x - 2.0 * x.powi(3) + x.powi(5);
        let big_f = |x: f64| x + x * x / 2.0 - x.powi(4) / 2.0 + x.powi(6) / 6.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let out = cumulative_integral(&xs, &ys, 7);
        for (k, &x) in xs.iter().enumerate() {
            assert!((out[k] - (big_f(x) - big_f(xs[7]))).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_cumulative_of_trig_data() {
        let n = 32;
        let vals: Vec<f64> = (0..n).map(|j| 1.0 + (2.0 * PI * j as f64 / n as f64).cos()).collect();
        let out = periodic_cumulative(&vals);
        for (j, v) in out.iter().enumerate() {
            let t = 2.0 * PI * j as f64 / n as f64;
            assert!((v - (t + t.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_and_alternate_paths_agree_on_exact_forms() {
        // ω = d(x1² x2 − x2³/3)
        let g = make_grid(32, 64).unwrap();
        let form = OneForm {
            w1: RealField::from_fn(&g, |x, y| 2.0 * x * y),
            w2: RealField::from_fn(&g, |x, y| x * x - y * y),
            boundary: None,
        };
        let a = integrate_radial_then_angular(&form);
        let b = integrate_angular_then_radial(&form);
        let pot = |x: f64, y: f64| x * x * y - y.powi(3) / 3.0;
        let base = g.nodes[0];
        let p0 = pot(base.re, base.im);
        for (k, z) in g.nodes.iter().enumerate() {
            assert!((a.interior.values[k] - (pot(z.re, z.im) - p0)).abs() < 1e-9);
            assert!((a.interior.values[k] - b.interior.values[k]).abs() < 1e-10);
        }
        for (j, z) in g.boundary_samples.iter().enumerate() {
            assert!((a.boundary[j] - (pot(z.re, z.im) - p0)).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn t_is_linear(ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, s in 0.1..3.0f64) {
            let g = make_grid(8, 16).unwrap();
            let op = PompeiuOperator::new(&g);
            let f = DiskField::from_fn(&g, |z| z * z.conj() + s);
            let h = DiskField::from_fn(&g, |z| (z * s).exp());
            let (alpha, beta) = (c(ar, ai), c(br, 0.0));
            let lhs = op.apply(&f.scale(alpha).add(&h.scale(beta)));
            let rhs = op.apply(&f).scale(alpha).add(&op.apply(&h).scale(beta));
            let scale = 1.0 + lhs.sup_norm();
            prop_assert!(lhs.sub(&rhs).sup_norm() <= 1e-13 * scale);
        }

        #[test]
        fn grid_weights_sum_to_area(nr in 4usize..40, half in 4usize..40) {
            let g = make_grid(nr, 2 * half).unwrap();
            let area: f64 = g.quadrature_weights.iter().sum();
            prop_assert!((area - PI).abs() < 1e-12);
        }
    }
}
