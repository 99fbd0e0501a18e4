use std::f64::consts::PI;

use super::*;
use crate::field::{CoefficientField, GridSpec, Point};
use crate::nodal::nodal_domains;
use crate::solver::{solve_dirichlet, BoundaryData, DirichletProblem, MaskedRegion, Region};

fn field(dim: usize, half: f64, h: f64, f: impl Fn(&Point) -> f64 + Sync) -> ScalarField {
    ScalarField::from_fn(&GridSpec::cube(dim, half, h).unwrap(), "f", f).unwrap()
}

fn xy(p: &Point) -> f64 {
    p[0] * p[1]
}

#[test]
fn constant_ratio() {
    let u = field(2, 1.25, 1.0 / 32.0, xy);
    let v = field(2, 1.25, 1.0 / 32.0, |p| 3.0 * p[0] * p[1]);
    let r = ratio_field(&v, &u).unwrap();
    assert!(!r.is_divergent());
    let defined: Vec<f64> = r.values().iter().copied().filter(|q| !q.is_nan()).collect();
    assert!(defined.len() > 1000);
    assert!(defined.iter().all(|q| (q - 3.0).abs() < 1e-14));
}

#[test]
fn algebraic_quotient_and_band() {
    let h = 1.0 / 64.0;
    let u = field(2, 1.25, h, xy);
    let v = field(2, 1.25, h, |p| xy(p) * (p[0] * p[0] - p[1] * p[1]));
    let r = ratio_field(&v, &u).unwrap();
    let g = u.grid();
    for i in 0..g.node_count() {
        let p = g.node_point(i);
        let near_axis = p[0].abs().min(p[1].abs()) < 2.0 * h - 1e-12;
        assert_eq!(r.mask()[i], !near_axis, "{p:?}");
        if let Some(q) = r.value(i) {
            assert!((q - (p[0] * p[0] - p[1] * p[1])).abs() < 1e-10);
        }
    }
}

#[test]
fn missing_zeros_are_flagged() {
    // v/u = 1/y: the sup over the defined nodes of B₁ is 1/(2h) and grows as h → 0
    let sups: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&h| {
            let r = ratio_field(&field(2, 1.25, h, |p| p[0]), &field(2, 1.25, h, xy)).unwrap();
            assert!(r.is_divergent());
            let e = r.extremes_in(&Ball::centered(1.0).unwrap()).unwrap();
            assert!((e.sup_abs - 1.0 / (2.0 * h)).abs() < 1e-9);
            e.sup_abs
        })
        .collect();
    assert!(sups[1] > 1.9 * sups[0]);
    assert!(matches!(
        check_inclusion(
            &field(2, 1.25, 1.0 / 16.0, xy),
            &field(2, 1.25, 1.0 / 16.0, |p| p[0]),
            None
        ),
        Err(Error::InclusionViolation { .. })
    ));
    assert!(matches!(
        ratio_field(&field(2, 1.0, 0.25, |p| p[0]), &field(2, 1.0, 0.25, |_| 0.0)),
        Err(Error::DegenerateField(_))
    ));
}

#[test]
fn upper_bound_constant() {
    let h = 1.0 / 32.0;
    let u = field(2, 8.25, h, xy);
    let v = field(2, 8.25, h, |p| xy(p) * (p[0] * p[0] - p[1] * p[1]));
    let rep = boundedness_report(&v, &u, &BoundednessConfig::default()).unwrap();
    // v = r⁴ sin 4θ / 4 and u = r² sin 2θ / 2 on the circle of radius 8
    assert!((rep.sup_v_b8 / 1024.0 - 1.0).abs() < 1e-3, "{}", rep.sup_v_b8);
    assert!((rep.sup_u_b8 / 32.0 - 1.0).abs() < 1e-3);
    // the band |y| < 2h and the 256-direction sphere sampling cost about 1% at this h
    assert!((rep.sup_ratio_b1 - 1.0).abs() < 0.02, "{}", rep.sup_ratio_b1);
    assert!((rep.c_emp * 32.0 - 1.0).abs() < 0.05);
    assert!(rep.two_sided_c.is_none());
    assert!(rep.construction.same_signs && rep.construction.checked_nodes > 1000);

    let same = boundedness_report(&u, &u, &BoundednessConfig::default()).unwrap();
    assert_eq!(same.two_sided_c, Some(1.0));
    assert_eq!(same.c_emp, 1.0);
}

#[test]
fn two_sided_constant_of_a_positive_multiplier() {
    let h = 1.0 / 32.0;
    let u = field(2, 8.25, h, xy);
    let v = field(2, 8.25, h, |p| xy(p) * (2.0 + p[0]));
    let rep = boundedness_report(&v, &u, &BoundednessConfig::default()).unwrap();
    // sup P / inf P over B₁ for P = 2 + x
    assert!(
        (rep.two_sided_c.unwrap() / 3.0 - 1.0).abs() < 0.02,
        "{:?}",
        rep.two_sided_c
    );
}

#[test]
fn maximum_sits_on_the_sphere() {
    let h = 1.0 / 64.0;
    let b1 = Ball::centered(1.0).unwrap();
    let u = field(2, 1.25, h, xy);
    for v in [
        field(2, 1.25, h, |p| xy(p) * (p[0] * p[0] - p[1] * p[1])),
        field(2, 1.25, h, |p| xy(p) * (2.0 + p[0])),
    ] {
        let r = strong_max_check(&v, &u, &b1).unwrap();
        assert!(!r.constant_ratio && r.max_on_boundary, "{r:?}");
        assert!(r.sup_location[0].abs() > 0.99 && r.interior_gap.abs() < 1e-12, "{r:?}");
    }
    let r = strong_max_check(&u.scaled(3.0), &u, &b1).unwrap();
    assert!(r.constant_ratio && !r.max_on_boundary);
}

#[test]
fn oscillation_exponents() {
    let h = 1.0 / 128.0;
    let scales = [1.0, 0.5, 0.25, 0.125];
    let u = field(2, 1.25, h, xy);
    let quad = field(2, 1.25, h, |p| xy(p) * (p[0] * p[0] - p[1] * p[1]));
    let prof = holder_probe(&quad, &u, &[0.0; 3], &scales).unwrap();
    // osc of x² − y² over B_r is 2r²
    for (r, o) in prof.scales.iter().zip(&prof.osc) {
        assert!((o / (2.0 * r * r) - 1.0).abs() < 0.06, "{r} {o}");
    }
    assert!((prof.alpha_fit.unwrap() - 2.0).abs() < 0.05);
    assert!(prof.decay_at_100.unwrap() <= 0.01 && prof.decays(0.5));
    assert!(prof.osc.windows(2).all(|w| w[1] <= w[0]));

    let lin = field(2, 1.25, h, |p| xy(p) * (2.0 + p[0]));
    let prof = holder_probe(&lin, &u, &[0.0; 3], &scales).unwrap();
    assert!((prof.alpha_fit.unwrap() - 1.0).abs() < 0.05);

    let prof = holder_probe(&u.scaled(3.0), &u, &[0.0; 3], &scales).unwrap();
    assert!(prof.osc.iter().all(|o| *o < 1e-12) && prof.alpha_fit.is_none() && prof.decays(0.5));

    let mut buf = Vec::new();
    prof.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);

    assert!(matches!(
        holder_probe(&quad, &u, &[0.0; 3], &[1.0, 0.5]),
        Err(Error::TooFewSamples { found: 2, .. })
    ));
    assert!(matches!(
        holder_probe(&quad, &u, &[0.5, 0.5, 0.0], &scales),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn operator_pair_transfer() {
    let h = 1.0 / 32.0;
    let g = GridSpec::cube(2, 1.5, h).unwrap();
    let u = ScalarField::from_fn(&g, "u", xy).unwrap();
    let op_u = CoefficientField::identity(&g);
    let op_v = CoefficientField::isotropic_from_fn(&g, |p| 2.0 + (p[0] * p[0] - p[1] * p[1]).tanh()).unwrap();
    let problem = DirichletProblem {
        operator: op_v.clone(),
        region: Region::Box,
        boundary: BoundaryData::function(xy),
    };
    let v = solve_dirichlet(&problem, 1e-10).unwrap().solution.with_label("v");
    let rep = frequency_transfer_check(&u, &v, &op_u, &op_v, &TransferConfig::default()).unwrap();
    assert!(rep.residual_u <= 1e-8 && rep.residual_v <= 1e-8, "{rep:?}");
    assert!((rep.d_emp - 2.0).abs() < 0.05 && rep.pass);

    let same = frequency_transfer_check(&u, &u, &op_u, &op_u, &TransferConfig::default()).unwrap();
    assert!((same.d_emp - 2.0).abs() < 1e-9);

    let batch = frequency_transfer_batch(
        &u,
        &op_u,
        &[(u.clone(), op_u.clone()), (v, op_v)],
        &TransferConfig::default(),
    )
    .unwrap();
    assert!(batch.pass && batch.max_d >= 2.0 - 0.05);

    let x = ScalarField::from_fn(&g, "x", |p| p[0]).unwrap();
    assert!(matches!(
        frequency_transfer_check(&u, &x, &op_u, &op_u, &TransferConfig::default()),
        Err(Error::NodalSetMismatch { .. })
    ));
}

#[test]
fn liouville_proportional_and_mismatch() {
    let h = 1.0 / 16.0;
    let u = field(2, 4.5, h, xy);
    let rep = liouville_probe(&u, &u.scaled(3.0), &[1.0, 2.0, 4.0], 1e-12).unwrap();
    assert_eq!(rep.verdict, LiouvilleVerdict::Proportional);
    assert!(rep
        .windows
        .iter()
        .all(|w| (w.c_fit - 3.0).abs() < 1e-8 && w.residual < 1e-12));
    // c scales by c₂/c₁
    let rep2 = liouville_probe(&u.scaled(2.0), &u.scaled(-5.0), &[1.0, 2.0, 4.0], 1e-12).unwrap();
    assert!((rep2.c_fit + 2.5).abs() < 1e-12);

    let quartic = field(2, 4.5, h, |p| xy(p) * (p[0] * p[0] - p[1] * p[1]));
    assert!(matches!(
        liouville_probe(&u, &quartic, &[1.0, 2.0, 4.0], 1e-12),
        Err(Error::NodalSetMismatch { .. })
    ));
    assert!(matches!(
        liouville_probe(&u, &u, &[1.0, 8.0], 1e-12),
        Err(Error::DegenerateBall { .. })
    ));
}

#[test]
fn exponential_family_is_frequency_unbounded() {
    let h = 1.0 / 8.0;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = field(3, 4.25, h, |p| p[2].sin() * p[0].exp());
    let v = field(3, 4.25, h, |p| p[2].sin() * ((p[0] + p[1]) * s).exp());
    let rep = liouville_probe(&u, &v, &[1.0, 2.0, 4.0], 1e-2).unwrap();
    assert_eq!(rep.verdict, LiouvilleVerdict::FrequencyUnbounded);
    assert!(rep.growth_u >= 0.5 && rep.growth_v >= 0.5, "{rep:?}");
    // oracle: sup of sin(z)·e^x on the disk of radius r in the (x, z) plane
    let sup = |r: f64| {
        (0..20_000)
            .map(|k| {
                let t = PI * k as f64 / 20_000.0;
                (r * t.sin()).sin().abs() * (r * t.cos()).exp()
            })
            .fold(0.0, f64::max)
    };
    let nd = |r: f64| (sup(r) / sup(r / 2.0)).log2();
    assert!(
        (rep.growth_u - (nd(4.0) - nd(1.0))).abs() < 0.05,
        "{} {}",
        rep.growth_u,
        nd(4.0) - nd(1.0)
    );
}

fn quadrant_view(h: f64, half: f64) -> (ScalarField, DomainView) {
    let f = field(2, half, h, xy);
    let part = nodal_domains(&f, &Ball::centered(half - 0.2).unwrap()).unwrap();
    let id = part.domain_at(&f, &[1.0, 1.0, 0.0]).unwrap();
    let view = DomainView::from_partition(&f, &part, id).unwrap();
    (f, view)
}

fn halfplane_view(h: f64, half: f64) -> (ScalarField, DomainView) {
    let f = field(2, half, h, |p| p[1]);
    let part = nodal_domains(&f, &Ball::centered(half - 0.2).unwrap()).unwrap();
    let id = part.domain_at(&f, &[0.0, 1.0, 0.0]).unwrap();
    (f.clone(), DomainView::from_partition(&f, &part, id).unwrap())
}

#[test]
fn carleson_constants() {
    let ms: Vec<(f64, f64)> = [1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&h| {
            let (q, qv) = quadrant_view(h, 3.5);
            let a = carleson_check(&q, &qv, 0.5).unwrap();
            // sup_{B_{1/2}} xy = 1/8, far sup xy at (√2, √2) = 2
            assert!(
                (a.inner_sup - 0.125).abs() < 1e-3 && (a.far_sup - 2.0).abs() < 0.1,
                "{a:?}"
            );
            let (p, pv) = halfplane_view(h, 3.5);
            let b = carleson_check(&p, &pv, 0.5).unwrap();
            assert!((b.m_emp - 0.25).abs() < 1e-9, "{b:?}");
            (a.m_emp, b.m_emp)
        })
        .collect();
    assert!((ms[0].0 / ms[1].0 - 1.0).abs() < 0.1);
    assert!(ms[1].0 <= 0.125);
    let (q, qv) = quadrant_view(1.0 / 16.0, 3.5);
    assert!(matches!(carleson_check(&q, &qv, 3.0), Err(Error::CorkscrewFailure(_))));
    assert!(matches!(carleson_check(&q, &qv, 0.2), Err(Error::Precondition(_))));
    // a field that does not vanish on the boundary
    let shifted = q
        .combine(1.0, &field(2, 3.5, 1.0 / 16.0, |_| 1.0), 1.0, "xy+1")
        .unwrap();
    assert!(matches!(
        carleson_check(&shifted, &qv, 0.5),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn iteration_decay_on_the_half_plane() {
    let (y, view) = halfplane_view(1.0 / 64.0, 1.5);
    let w = y.scaled(10.0);
    let r = iteration_decay_probe(&w, &view, 1.0, 0.1).unwrap();
    assert!(r.violations.is_empty() && r.pass, "{r:?}");
    assert!(r.a_emp >= 0.5);
    // no negative part: only the A_{1/2} clause limits a
    assert!(r.min_k_half >= 0.0);

    let bad = w
        .combine(1.0, &field(2, 1.5, 1.0 / 64.0, |_| 1.0), -5.0, "w-5")
        .unwrap();
    let r = iteration_decay_probe(&bad, &view, 1.0, 0.1).unwrap();
    assert!(!r.pass && !r.violations.is_empty());
}

/// Odd extension across `y = 0` of the half-plane Poisson integral of the indicator of `[a, b]`.
fn poisson_bump(p: &Point, a: f64, b: f64) -> f64 {
    let (x, y) = (p[0], p[1]);
    if y == 0.0 {
        return if x > a && x < b {
            1.0
        } else if x == a || x == b {
            0.5
        } else {
            0.0
        };
    }
    let s = y.signum();
    let y = y.abs();
    s * (((b - x) / y).atan() - ((a - x) / y).atan()) / PI
}

fn solved_bump(g: &GridSpec, a: f64, b: f64) -> ScalarField {
    let problem = DirichletProblem {
        operator: CoefficientField::identity(g),
        region: Region::Box,
        boundary: BoundaryData::function(move |p| poisson_bump(p, a, b)),
    };
    solve_dirichlet(&problem, 1e-10).unwrap().solution
}

#[test]
fn half_plane_poisson_single_domain() {
    // nodes straddle y = 0 so the lower side of the domain is a cut boundary
    let h = 1.0 / 32.0;
    let g = GridSpec::from_box(2, &[-5.25, -0.5 - h / 2.0], &[5.25, 5.25 + h / 2.0], h).unwrap();
    let y = ScalarField::from_fn(&g, "y", |p| p[1]).unwrap();
    let part = nodal_domains(&y, &Ball::centered(3.2).unwrap()).unwrap();
    let view = DomainView::from_partition(&y, &part, part.domain_at(&y, &[0.0, 1.0, 0.0]).unwrap()).unwrap();
    let problem = DirichletProblem {
        operator: CoefficientField::identity(&g),
        region: Region::Masked(MaskedRegion {
            interior: (0..g.node_count()).map(|i| g.node_point(i)[1] > 0.0).collect(),
            level: Some(y.clone()),
            clip: None,
        }),
        boundary: BoundaryData::function(|p| poisson_bump(p, 4.0, 5.0)),
    };
    let v = solve_dirichlet(&problem, 1e-10).unwrap().solution;
    let rep = single_domain_report(&y, &v, &view, &SingleDomainConfig::default()).unwrap();
    assert!(rep.m_emp.is_finite() && rep.m_emp >= 1.0);
    assert!(rep.chunks >= 1 && rep.chunk_bound_c.is_finite() && rep.chunk_bound_c > 0.0);
    // v/u₀ against the closed-form Poisson quotient
    let g = y.grid();
    let mut worst: f64 = 0.0;
    g.for_each_node_in_ball(&Ball::centered(1.0).unwrap(), |i, p| {
        if p[1] >= 2.0 * h {
            let q = v.value(i) / p[1];
            worst = worst.max((q / (poisson_bump(p, 4.0, 5.0) / p[1]) - 1.0).abs());
        }
    });
    assert!(worst < 0.03, "{worst}");
}

#[test]
fn sign_changing_decay() {
    let h = 1.0 / 64.0;
    let (y, view) = halfplane_view(h, 2.5);
    let v = solved_bump(y.grid(), 1.2, 1.8);
    let raw = y.combine(1.0, &v, -0.2, "w").unwrap();
    let g = y.grid();
    // normalize so that min_{A₁} w = 1 (δ = 0.1)
    let in_q = |p: &Point, s: f64| p[0].abs() <= s && p[1].abs() <= s;
    let (mut a1, mut a_half) = (f64::INFINITY, f64::INFINITY);
    for i in 0..g.node_count() {
        let p = g.node_point(i);
        if p[1] > 0.0 && in_q(&p, 1.0) && p[1] >= 0.1 {
            a1 = a1.min(raw.value(i));
        }
        if p[1] > 0.0 && in_q(&p, 0.5) && p[1] >= 0.05 {
            a_half = a_half.min(raw.value(i));
        }
    }
    let w = raw.scaled(1.0 / a1);
    assert!(w.values().iter().any(|x| *x < 0.0));
    let r = iteration_decay_probe(&w, &view, 1.0, 0.1).unwrap();
    assert!(r.pass && r.a_emp > 0.0, "{r:?}");
    assert!((r.a_emp - a_half / a1).abs() < 1e-12);
}
