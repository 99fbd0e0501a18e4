use nodalab::solver::residual_norm;
use nodalab_bench::product_field;

#[test]
fn product_fixture_is_harmonic() {
    let (w, op) = product_field(1.0, 0.125);
    assert_eq!(w.grid().node_count(), 17 * 17);
    assert_eq!(w.eval(&[0.5, -0.25, 0.0]).unwrap(), -0.125);
    assert!(residual_norm(&w, &op).unwrap() < 1e-14);
}
