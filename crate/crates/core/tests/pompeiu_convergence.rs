use mgdeform_core::disk_field::{dbar, make_grid, DiskField, PompeiuOperator};
use mgdeform_core::Complex64;

fn t_of_one_error(n: usize) -> f64 {
    let g = make_grid(n, 2 * n).unwrap();
    let t = PompeiuOperator::new(&g).apply(&DiskField::from_fn(&g, |_| Complex64::new(1.0, 0.0)));
    t.values.iter().zip(&g.nodes).fold(0.0, |m, (v, z)| m.max((v - z.conj()).norm()))
}

fn suite() -> Vec<(&'static str, fn(Complex64) -> Complex64)> {
    vec![
        ("zz", |z| z * z.conj()),
        ("zbar", |z| z.conj()),
        ("z2zbar", |z| z * z * z.conj()),
        ("zbar3", |z| z.conj().powu(3)),
        ("mixed", |z| Complex64::new(1.0, 0.5) + z - z.conj() * z.conj() * z),
    ]
}

fn right_inverse_error(n: usize, f: fn(Complex64) -> Complex64) -> f64 {
    let g = make_grid(n, 2 * n).unwrap();
    let field = DiskField::from_fn(&g, f);
    let back = dbar(&PompeiuOperator::new(&g).apply(&field)).unwrap();
    back.sub(&field).sup_norm() / field.sup_norm()
}

#[test]
fn t_of_one_converges_at_second_order() {
    // oracle: T(1) = z̄ exactly
    let e64 = t_of_one_error(64);
    let e128 = t_of_one_error(128);
    println!("T(1) error: 64 -> {e64:.3e}, 128 -> {e128:.3e}, ratio {:.3}", e64 / e128);
    assert!(e128 <= 2e-3);
    assert!(e64 / e128 >= 1.8);
}

#[test]
fn right_inverse_on_polynomial_suite() {
    for (name, f) in suite() {
        let e32 = right_inverse_error(32, f);
        let e64 = right_inverse_error(64, f);
        println!("{name}: {e32:.3e} -> {e64:.3e}");
        assert!(e64 < e32, "{name} did not decrease");
        assert!(e64 < 1e-2, "{name}: {e64}");
    }
}

#[test]
fn t_of_one_matches_brute_force_quadrature() {
    // independent check at a few nodes: midpoint rule on a 10x finer grid,
    // skipping the fine cells adjacent to the target
    let g = make_grid(16, 32).unwrap();
    let t = PompeiuOperator::new(&g).apply(&DiskField::from_fn(&g, |_| Complex64::new(1.0, 0.0)));
    let fine = make_grid(160, 320).unwrap();
    for &k in &[0usize, 100, 300, 511] {
        let z = g.nodes[k];
        let mut acc = Complex64::new(0.0, 0.0);
        for (zeta, w) in fine.nodes.iter().zip(&fine.quadrature_weights) {
            let d = zeta - z;
            if d.norm() > 1e-12 {
                acc += w / d;
            }
        }
        let brute = -acc / std::f64::consts::PI;
        assert!((brute - z.conj()).norm() < 2e-2, "brute {brute} vs {}", z.conj());
        assert!((t.values[k] - z.conj()).norm() < 2e-2);
    }
}
