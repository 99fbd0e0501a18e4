use nodalab::frequency::{frequency_and_h, frequency_checks};
use nodalab::nodal::{boundary_geometry_report, nodal_domains, GeometryConfig};
use nodalab::scenario::run_suite;
use nodalab::solver::{residual_norm, solve_dirichlet, BoundaryData};
use nodalab::{Ball, CoefficientField, DirichletProblem, DistanceField, GridSpec, Region, ScalarField};

#[test]
fn solve_save_load_analyze() {
    let g = GridSpec::cube(2, 2.25, 1.0 / 32.0).unwrap();
    // xy solves div(a∇w) = 0 for any a depending on x² − y² only
    let op = CoefficientField::isotropic_from_fn(&g, |p| 2.0 + (p[0] * p[0] - p[1] * p[1]).tanh()).unwrap();
    let rep = solve_dirichlet(
        &DirichletProblem {
            operator: op.clone(),
            region: Region::Box,
            boundary: BoundaryData::function(|p| p[0] * p[1]),
        },
        1e-10,
    )
    .unwrap();
    assert!(rep.residual_linf <= 1e-8);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.nfield");
    rep.solution.save(&path).unwrap();
    let w = ScalarField::load(&path).unwrap();
    assert_eq!(w.values(), rep.solution.values());
    assert_eq!(w.label(), "w");
    assert!(residual_norm(&w, &op).unwrap() <= 1e-8);

    let radii = [0.125, 0.25, 0.5, 1.0, 2.0];
    let prof = frequency_and_h(&w, &op, &[0.0; 3], &radii).unwrap();
    assert!(prof.mu_weight_used);
    for n in &prof.n_values {
        assert!((n - 2.0).abs() < 0.05, "{n}");
    }
    let certs = frequency_checks(&prof, &w, &op).unwrap();
    assert!(certs.monotone.violation_at_zero <= 1e-2);

    let part = nodal_domains(&w, &Ball::centered(2.0).unwrap()).unwrap();
    assert_eq!(part.domains.len(), 4);
    let id = part.domain_at(&w, &[1.0, 1.0, 0.0]).unwrap();
    let delta = DistanceField::from_zero_set(&g, &part.zero_set, None).unwrap();
    let cfg = GeometryConfig {
        ahlfors_max_scale: 0.5,
        ..GeometryConfig::default()
    };
    let geo = boundary_geometry_report(&w, &part, id, &delta, &cfg).unwrap();
    assert_eq!(geo.sign, 1);
    assert!(geo.quantitatively_connected);
}

#[test]
fn example_configs_pass() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for name in ["frequency.toml", "neck.toml"] {
        let bundle = run_suite(format!("{root}/{name}")).unwrap();
        assert!(bundle.pass, "{name}:\n{}", bundle.render_text());
    }
}

#[test]
fn missing_config_is_a_config_error() {
    let err = run_suite("/nonexistent/suite.toml").unwrap_err();
    assert!(matches!(err, nodalab::Error::Config(_)));
}
