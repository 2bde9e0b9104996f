use std::sync::Arc;

use mgdeform_core::ambient_metric::{AmbientMetric, Vec3};
use mgdeform_core::deformation_flow::ChartState;
use mgdeform_core::disk_field::{make_grid, DiskField, RealField};
use mgdeform_core::elliptic_system::{Linearized, Synthetic};
use mgdeform_core::gluing::*;
use mgdeform_core::linalg::{largest_principal_angle, GapRule};
use mgdeform_core::rh_solver::weighted_real_vector;
use mgdeform_core::surface_patch::SurfacePatch;
use mgdeform_core::{Complex64, Error};
use nalgebra::{DMatrix, DVector};

fn z0() -> Complex64 {
    Complex64::new(0.1, 0.2)
}

fn dichotomy(metric: AmbientMetric) {
    let g = make_grid(64, 128).unwrap();
    let s = build_glued_sphere(&metric, &g).unwrap();
    let sys = ClosedSystem::new(s, Arc::new(Linearized), ClosedOptions::default()).unwrap();
    let zero = ChartState::zero(&g);
    let free = sys.solve([&zero, &zero], 0.0, Mode::Free).unwrap();
    assert_eq!(free.dimension, 3, "{:?}", &free.singular_values[30..]);
    assert!(free.canonical);
    let fixed = sys.solve([&zero, &zero], 0.0, Mode::PointFixed { z0: z0() }).unwrap();
    assert_eq!(fixed.dimension, 0, "{:?}", &fixed.singular_values[30..]);
    assert!(fixed.particular.sup_norm() <= 1e-6);
}

#[test]
fn unit_sphere_has_three_parameter_family_and_rigid_point_fixed_mode() {
    dichotomy(AmbientMetric::Euclidean);
}

#[test]
fn perturbed_sphere_keeps_the_dichotomy() {
    dichotomy(AmbientMetric::DiagPerturbation { epsilon: 0.05 });
}

/// u and ċ of the translation by e on one chart.
fn translation(p: &SurfacePatch, e: Vec3) -> (DiskField, RealField) {
    let g = &p.grid;
    let mut u = DiskField::zeros(g);
    let mut c = RealField::zeros(g);
    for (i, q) in p.nodes.iter().enumerate() {
        let gi = q.g.try_inverse().unwrap();
        let r = [q.y1.dot(&e), q.y2.dot(&e)];
        u.values[i] = Complex64::new(gi[(0, 0)] * r[0] + gi[(0, 1)] * r[1], -(gi[(1, 0)] * r[0] + gi[(1, 1)] * r[1]));
        c.values[i] = q.n.dot(&e);
    }
    (u, c)
}

fn stacked(u: &DiskField, c: &RealField) -> DVector<f64> {
    let mut v = weighted_real_vector(u);
    v.extend(weighted_real_vector(&c.to_complex()).into_iter().step_by(2));
    DVector::from_vec(v)
}

#[test]
fn free_family_is_the_translations() {
    let g = make_grid(32, 64).unwrap();
    let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
    let sol = solve_closed(&s, Arc::new(Linearized), Mode::Free, ClosedOptions::default()).unwrap();
    let family = DMatrix::from_columns(
        &sol.basis.iter().map(|b| stacked(&b.plus.u, &b.plus.c_dot.interior)).collect::<Vec<_>>(),
    );
    let exact: Vec<DVector<f64>> = [Vec3::x(), Vec3::y(), Vec3::z()]
        .iter()
        .map(|e| {
            let (u, c) = translation(&s.plus, *e);
            stacked(&u, &c)
        })
        .collect();
    let angle = largest_principal_angle(&family, &DMatrix::from_columns(&exact)).unwrap();
    assert!(angle < 1e-2, "{angle}");
}

#[test]
fn transmission_residual_converges() {
    let r = |n: usize| {
        let g = make_grid(n, 2 * n).unwrap();
        let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
        solve_closed(&s, Arc::new(Linearized), Mode::Free, ClosedOptions::default()).unwrap().transmission_residual
    };
    let (r16, r32) = (r(16), r(32));
    assert!(r32 < r16 / 3.0, "{r16} {r32}");
}

#[test]
fn relabeling_the_charts_keeps_the_dimensions() {
    let g = make_grid(16, 32).unwrap();
    let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap().swapped().unwrap();
    let free = solve_closed(&s, Arc::new(Linearized), Mode::Free, ClosedOptions::default()).unwrap();
    let fixed = solve_closed(&s, Arc::new(Linearized), Mode::PointFixed { z0: z0() }, ClosedOptions::default()).unwrap();
    assert_eq!((free.dimension, fixed.dimension), (3, 0));
}

#[test]
fn members_combine_linearly() {
    let g = make_grid(16, 32).unwrap();
    let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
    let sol = solve_closed(&s, Arc::new(Linearized), Mode::Free, ClosedOptions::default()).unwrap();
    let m = sol.member(&[1.0, -2.0, 0.5]).unwrap();
    let direct = sol.basis[0].plus.u.add(&sol.basis[1].plus.u.scale(Complex64::new(-2.0, 0.0))).add(&sol.basis[2].plus.u.scale(Complex64::new(0.5, 0.0)));
    assert!(m.plus.u.sub(&direct).sup_norm() < 1e-12);
    assert!(sol.member(&[1.0]).is_err());
}

#[test]
fn point_fixed_mode_rejects_points_outside_the_disk() {
    let g = make_grid(8, 16).unwrap();
    let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
    let r = solve_closed(&s, Arc::new(Linearized), Mode::PointFixed { z0: Complex64::new(1.0, 0.0) }, ClosedOptions::default());
    assert!(matches!(r, Err(Error::Invalid(_))));
}

#[test]
fn carleman_rigidity_at_working_resolution() {
    let g = make_grid(64, 128).unwrap();
    let u = mgdeform_core::disk_field::BoundaryTrace::from_fn(&g, |_| Complex64::new(1.0, 0.0));
    let p = CarlemanProblem::new(u, Some(z0())).unwrap();
    let sol = solve_carleman(&p, 16, &GapRule::default()).unwrap();
    assert_eq!(sol.dimension, 0);
    assert!(sol.plus.is_empty() && sol.minus.is_empty());
}

#[test]
fn c_minus_matches_the_antiderivative() {
    // ȧ = −∇c / V makes −Vȧ exact with potential c
    let g = make_grid(32, 64).unwrap();
    let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
    let pot = |x: f64, y: f64| x * x * y - 0.5 * y * y + 0.3 * x;
    let grad = |x: f64, y: f64| (2.0 * x * y + 0.3, x * x - y);
    let u = DiskField {
        grid: g.clone(),
        values: g
            .nodes
            .iter()
            .zip(&s.minus.nodes)
            .map(|(z, p)| {
                let (g1, g2) = grad(z.re, z.im);
                Complex64::new(-g1 / p.v, g2 / p.v)
            })
            .collect(),
    };
    let base = g.nodes[g.base_node()];
    let c_plus: Vec<f64> = g.boundary_samples.iter().map(|z| pot(z.re, z.im) - pot(base.re, base.im) + 0.25).collect();
    let r = recover_c_minus(&s, &u, &Linearized, &ChartState::zero(&g), 0.0, &c_plus).unwrap();
    assert!((r.b1 - 0.25).abs() < 1e-6, "{}", r.b1);
    for (k, z) in g.nodes.iter().enumerate() {
        let want = pot(z.re, z.im) - pot(base.re, base.im) + 0.25;
        assert!((r.c_dot.interior.values[k] - want).abs() < 1e-6);
    }
    assert!(r.residual < 1e-6);
}

#[test]
fn c_minus_guards_the_division() {
    let g = make_grid(8, 16).unwrap();
    let s = build_glued_sphere(&AmbientMetric::Euclidean, &g).unwrap();
    // 1 + N₀ = r² stays away from zero on the nodes
    let prov = Synthetic::parse("n0 = -1 + x1*x1 + x2*x2").unwrap();
    // vanishes exactly at node 0
    let node = g.nodes[0];
    let prov2 = Synthetic::parse(&format!("n0 = -1 + 1e3*((x1 - {})^2 + (x2 - {})^2)", node.re, node.im)).unwrap();
    assert!(recover_c_minus(&s, &DiskField::zeros(&g), &prov, &ChartState::zero(&g), 0.0, &[0.0; 16]).is_ok());
    let r = recover_c_minus(&s, &DiskField::zeros(&g), &prov2, &ChartState::zero(&g), 0.0, &[0.0; 16]);
    assert!(r.unwrap_err().to_string().contains("1 + N0 vanishes"));
}
