use super::*;
use crate::field::Ball;

fn params(toml_text: &str) -> Params {
    toml::from_str(toml_text).unwrap()
}

/// `(x + iy)^d` by repeated complex multiplication.
fn complex_power(d: u32, x: f64, y: f64) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..d {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

#[test]
fn polynomial_basis_matches_complex_powers() {
    for d in 1..=8 {
        for &(x, y) in &[(0.3, -1.2), (2.0, 0.5), (-1.5, -0.75)] {
            let (re, im) = complex_power(d, x, y);
            let p = [x, y, 0.0];
            assert!((registry::poly_for_tests(d, false, &p) - re).abs() < 1e-9 * (1.0 + re.abs()));
            assert!((registry::poly_for_tests(d, true, &p) - im).abs() < 1e-9 * (1.0 + im.abs()));
        }
    }
}

#[test]
fn harmonic_poly_two_is_xy() {
    let sc = build_scenario("harmonic_poly", &params("d = 2\nh = 0.125")).unwrap();
    assert_eq!(sc.n0_declared, Some(2.0));
    assert!(sc.op_u.is_identity());
    // normalized on B_{4.25}: sup |xy| = 4.25²/2
    let s = 4.25f64 * 4.25 / 2.0;
    assert!((sc.normalization - 1.0 / s).abs() < 1e-3 / s);
    let v = sc.u.eval(&[1.0, 0.5, 0.0]).unwrap();
    assert!((v - 0.5 * sc.normalization).abs() < 1e-12);
    assert!(sc.residual_u < 1e-12);
    let im = build_scenario(
        "harmonic_poly",
        &params("d = 2\npart = 'im'\nh = 0.125\nnormalize = false"),
    )
    .unwrap();
    assert!((im.u.eval(&[1.0, 0.5, 0.0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn leon_simon_operator() {
    let sc = build_scenario("leon_simon", &params("amp = 0.1\nh = 0.125\nnormalize = false")).unwrap();
    assert_eq!(sc.dim(), 3);
    let g = &sc.grid;
    let i = g.index_of(g.locate(&[0.0, 0.0, 1.5]).unwrap().0);
    let z = g.node_point(i)[2];
    assert!((sc.op_u.entry(i, 0, 1) - 0.05 * z.sin()).abs() < 1e-15);
    assert_eq!(sc.op_u.entry(i, 0, 2), 0.0);
    assert!((sc.u.value(i) - (g.node_point(i)[0] * g.node_point(i)[1] + 0.1 * z.sin())).abs() < 1e-15);
    sc.residual_gate().unwrap();
    assert!(matches!(
        build_scenario("leon_simon", &params("amp = 0.6\nh = 0.25")),
        Err(Error::Config(_))
    ));
}

#[test]
fn exp_family_validation() {
    let sc = build_scenario("exp_family", &params("a = 1\nb = 0\nh = 0.25\nnormalize = false")).unwrap();
    let x: [f64; 3] = [0.5, -0.25, 1.0];
    assert!((sc.u.eval(&[0.5, -0.25, 1.0]).unwrap() - x[2].sin() * x[0].exp()).abs() < 1e-12);
    assert!(sc.n0_declared.is_none());
    assert!(matches!(
        build_scenario("exp_family", &params("a = 1\nb = 1\nh = 0.25")),
        Err(Error::Config(_))
    ));
}

#[test]
fn unknown_and_out_of_scope() {
    assert!(matches!(build_scenario("nope", &Params::new()), Err(Error::Config(_))));
    assert!(matches!(
        build_scenario("runge_collapse", &Params::new()),
        Err(Error::OutOfScope(_))
    ));
    assert!(matches!(
        build_scenario("harmonic_poly", &params("d = 2\nh = -1.0")),
        Err(Error::Config(_))
    ));
}

#[test]
fn normalization_is_idempotent() {
    let mut sc = build_scenario("product_pair", &params("h = 0.125")).unwrap();
    let ball = Ball::centered(8.0).unwrap();
    assert!((sc.u.sup_norm_on_ball(&ball).unwrap() - 1.0).abs() < 1e-12);
    let before = (
        sc.u.values().to_vec(),
        sc.v.clone().unwrap().values().to_vec(),
        sc.normalization,
    );
    normalize(&mut sc).unwrap();
    assert_eq!(sc.u.values(), &before.0[..]);
    assert_eq!(sc.v.as_ref().unwrap().values(), &before.1[..]);
    assert_eq!(sc.normalization, before.2);
    // the pair keeps its ratio
    let g = &sc.grid;
    let i = g.index_of(g.locate(&[0.5, 0.25, 0.0]).unwrap().0);
    let p = g.node_point(i);
    let q = sc.v.as_ref().unwrap().value(i) / sc.u.value(i);
    assert!((q - (p[0] * p[0] - p[1] * p[1])).abs() < 1e-12);
}

#[test]
fn random_family_is_seeded() {
    let a = build_scenario("random_harmonic", &params("deg = 3\ncount = 3\nseed = 5\nh = 0.25")).unwrap();
    let b = build_scenario("random_harmonic", &params("deg = 3\ncount = 3\nseed = 5\nh = 0.25")).unwrap();
    let c = build_scenario("random_harmonic", &params("deg = 3\ncount = 3\nseed = 6\nh = 0.25")).unwrap();
    assert_eq!(a.family.len(), 3);
    for (x, y) in a.family.iter().zip(&b.family) {
        assert_eq!(x.values(), y.values());
    }
    assert_ne!(a.family[0].values(), c.family[0].values());
    assert!(a.residual_family.iter().all(|r| *r < 1e-8));
}

#[test]
fn residual_gate_blocks_checks() {
    let sc = build_scenario("exp_family", &params("h = 0.25\nresidual_tol = 1e-12")).unwrap();
    let spec: CheckSpec = toml::from_str("kind = 'frequency'").unwrap();
    let out = run_check(&sc, &spec, &|_| unreachable!());
    assert!(!out.pass);
    assert!(out.error.unwrap().contains("residual certificate"));
}

#[test]
fn config_errors() {
    assert!(matches!(SuiteConfig::from_toml(""), Err(Error::Config(m)) if m == "no scenarios"));
    assert!(matches!(SuiteConfig::from_toml("[[scenario]"), Err(Error::Config(_))));
    let unknown_check = "[[scenario]]\nid = 'a'\nkind = 'product_pair'\n[[scenario.check]]\nkind = 'bogus'\n";
    assert!(matches!(SuiteConfig::from_toml(unknown_check), Err(Error::Config(_))));
    let dup = "[[scenario]]\nid = 'a'\nkind = 'neck'\n[[scenario]]\nid = 'a'\nkind = 'neck'\n";
    assert!(matches!(SuiteConfig::from_toml(dup), Err(Error::Config(_))));
    let bad_cmp =
        "[[scenario]]\nid = 'a'\nkind = 'neck'\n[[compare]]\nkind = 'flip'\nmetric = 'g.x'\nleft = 'a'\nright = 'b'\n";
    assert!(matches!(SuiteConfig::from_toml(bad_cmp), Err(Error::Config(_))));
}

const FREQUENCY_SUITE: &str = r#"
[global]
h = 0.03125

[[scenario]]
id = "p1"
kind = "harmonic_poly"
d = 1
[[scenario.check]]
kind = "frequency"
expect = 1.0
tol = 0.02
radii = [0.25, 0.5, 1.0, 2.0]

[[scenario]]
id = "p2"
kind = "harmonic_poly"
d = 2
[[scenario.check]]
kind = "frequency"
expect = 2.0
radii = [0.25, 0.5, 1.0, 2.0]
[[scenario.check]]
kind = "doubling"
expect = 2.0

[[scenario]]
id = "p3"
kind = "harmonic_poly"
d = 3
[[scenario.check]]
kind = "frequency"
expect = 3.0
radii = [0.25, 0.5, 1.0, 2.0]

[[scenario]]
id = "runge"
kind = "runge_collapse"
"#;

#[test]
fn frequency_suite_rows() {
    let cfg = SuiteConfig::from_toml(FREQUENCY_SUITE).unwrap();
    let bundle = run_suite_with_workers(&cfg, Some(2)).unwrap();
    assert!(bundle.pass, "{}", bundle.render_text());
    assert_eq!(bundle.exit_code(), 0);
    let rows: Vec<_> = bundle.summary.iter().filter(|r| r.check == "frequency").collect();
    assert_eq!(rows.len(), 3);
    for (d, r) in rows.iter().enumerate() {
        assert!((r.value.unwrap() - (d + 1) as f64).abs() < 0.02 * (d + 1) as f64);
    }
    let runge = bundle.scenarios.iter().find(|s| s.id == "runge").unwrap();
    assert!(runge.error.as_ref().unwrap().contains("out of scope"));
    let mut csv = Vec::new();
    bundle.write_summary_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("scenario,check,mandatory,pass,value,error\n"));
}

#[test]
fn bundle_is_independent_of_workers() {
    let cfg = SuiteConfig::from_toml(FREQUENCY_SUITE).unwrap();
    let a = run_suite_with_workers(&cfg, Some(1)).unwrap().to_json().unwrap();
    let b = run_suite_with_workers(&cfg, Some(3)).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    assert!(!a.contains("workers"));
}

#[test]
fn failing_mandatory_check_sets_exit_code() {
    let text = "[[scenario]]\nid = 'p'\nkind = 'harmonic_poly'\nd = 2\nh = 0.0625\n\
                [[scenario.check]]\nkind = 'frequency'\nexpect = 3.0\nradii = [0.5, 1.0]\n\
                [[scenario.check]]\nkind = 'frequency'\nlabel = 'optional'\nmandatory = false\nexpect = 3.0\nradii = [0.5, 1.0]\n";
    let bundle = run_suite_with_workers(&SuiteConfig::from_toml(text).unwrap(), Some(1)).unwrap();
    assert!(!bundle.pass);
    assert_eq!(bundle.exit_code(), 1);
    assert!(bundle.render_text().contains("NO"));
}

#[test]
fn neck_sweep_blows_up() {
    let text = r#"
[[scenario]]
id = "wide"
kind = "neck"
eps = 0.1
h = 0.0078125
[[scenario.check]]
kind = "single_domain"
[[scenario.check]]
kind = "geometry"
qc_deltas = [0.05, 0.1]
qc_scale = 1.0
ahlfors_max_scale = 0.25

[[scenario]]
id = "thin"
kind = "neck"
eps = 0.001
h = 0.0078125
[[scenario.check]]
kind = "single_domain"
[[scenario.check]]
kind = "geometry"
qc_deltas = [0.05, 0.1]
qc_scale = 1.0
ahlfors_max_scale = 0.25

[[compare]]
kind = "ratio_at_least"
metric = "single_domain.c2_over_c1"
left = "wide"
right = "thin"
threshold = 10.0

[[compare]]
kind = "flip"
metric = "geometry.connected"
left = "wide"
right = "thin"
"#;
    let bundle = run_suite_with_workers(&SuiteConfig::from_toml(text).unwrap(), None).unwrap();
    assert!(bundle.pass, "{}", bundle.render_text());
    let c = &bundle.compares[0];
    assert!(c.right_value.unwrap() / c.left_value.unwrap() >= 10.0);
}

#[test]
fn summary_table_round_trips() {
    let cfg = SuiteConfig::from_toml(FREQUENCY_SUITE).unwrap();
    let bundle = run_suite_with_workers(&cfg, Some(1)).unwrap();
    let table = SummaryTable::from_bundle_json(&bundle.to_json().unwrap()).unwrap();
    assert_eq!(table.render_text(), bundle.render_text());
    assert_eq!(table.exit_code(), bundle.exit_code());
    assert!(SummaryTable::from_bundle_json("{}").is_err());
}
