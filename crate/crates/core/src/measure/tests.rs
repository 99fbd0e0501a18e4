use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::field::GridSpec;
use crate::nodal::{deep_chunks, nodal_domains, DistanceField};

/// `u₀ = y` on a grid offset by `h/2` in `y`, so the zero set runs between node rows.
fn half_disk(h: f64) -> (MeasureDomain, BoundaryPartition) {
    let g = GridSpec::from_box(2, &[-5.25, -0.5 - h / 2.0], &[5.25, 5.25 + h / 2.0], h).unwrap();
    let y = ScalarField::from_fn(&g, "y", |p| p[1]).unwrap();
    let part = nodal_domains(&y, &Ball::centered(CLIP_RADIUS).unwrap()).unwrap();
    let id = part.domain_at(&y, &[0.0, 1.0, 0.0]).unwrap();
    let dom = MeasureDomain::new(&y, &CoefficientField::identity(&g), &part, id)
        .unwrap()
        .with_chunk_radius(0.2);
    let patches = BoundaryPartition::cubes(&dom, &Ball::centered(1.0).unwrap(), 2.0 / 16.0).unwrap();
    (dom, patches)
}

/// Harmonic measure of `[a, b]` on the diameter of the upper half-disk of
/// radius `r` seen from `(0, t)`, through `z ↦ -(z/r + r/z)` onto the upper
/// half-plane.
fn half_disk_oracle(a: f64, b: f64, r: f64, t: f64) -> f64 {
    // x → 0⁻ maps to +∞ and x → 0⁺ to −∞
    let s = |x: f64, left: bool| {
        if x == 0.0 {
            if left {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            -(x / r + r / x)
        }
    };
    let height = r / t - t / r;
    let arc = |lo: f64, hi: f64| ((hi / height).atan() - (lo / height).atan()) / PI;
    if a < 0.0 && b > 0.0 {
        arc(s(a, true), f64::INFINITY) + arc(f64::NEG_INFINITY, s(b, false))
    } else {
        let left = b <= 0.0;
        arc(s(a, left), s(b, left))
    }
}

#[test]
fn oracle_sanity() {
    let full = half_disk_oracle(-1.0, 1.0, 5.0, 1.0);
    assert!((full - (1.0 - 2.0 / PI * (5.2f64 / 4.8).atan())).abs() < 1e-12);
    let split = half_disk_oracle(-1.0, -0.5, 5.0, 1.0) + half_disk_oracle(-0.5, 1.0, 5.0, 1.0);
    assert!((split - full).abs() < 1e-12);
    // large radius tends to the half-plane value 1/2
    assert!((half_disk_oracle(-1.0, 1.0, 1e6, 1.0) - 0.5).abs() < 1e-5);
}

#[test]
fn half_disk_patch_weights() {
    let (dom, part) = half_disk(1.0 / 32.0);
    assert_eq!(part.len(), 16);
    assert!(part.coverage > 0.999);
    let m = harmonic_measure(&dom, &[0.0, 1.0, 0.0], &part).unwrap();
    assert!((m.total - 1.0).abs() < 1e-6, "total {}", m.total);
    assert!(m.weights.iter().all(|w| *w >= 0.0));
    for (k, w) in m.weights.iter().enumerate() {
        let a = -1.0 + k as f64 / 8.0;
        let exact = half_disk_oracle(a, a + 0.125, 5.0, 1.0);
        assert!((w / exact - 1.0).abs() < 0.02, "patch {k}: {w} vs {exact}");
    }
    let exact = half_disk_oracle(-1.0, 1.0, 5.0, 1.0);
    assert!((m.total_in_b1 / exact - 1.0).abs() < 0.02);
    assert!((m.total_in_b1 + m.rest - m.total).abs() < 1e-12);
}

#[test]
fn adjoint_matches_patch_solves() {
    let (dom, part) = half_disk(1.0 / 16.0);
    let pole = [0.3, 1.2, 0.0];
    let m = harmonic_measure(&dom, &pole, &part).unwrap();
    let stencil = dom.pole_stencil(&pole).unwrap();
    let radius = MOLLIFY_SPACINGS / 16.0;
    for id in [0, 7, 12] {
        let zs = dom.zero_set().clone();
        let p2 = part.clone();
        let data = BoundaryData::function(move |q| p2.patch_value(&zs, id, q, radius));
        let b = dom.system().rhs(&data);
        let (x, _, _) = dom.system().solve(&b, 1e-11, 1.0).unwrap();
        let direct: f64 = stencil.iter().map(|&(r, w)| w * x[r]).sum();
        assert!((direct - m.weights[id]).abs() < 1e-8, "{direct} vs {}", m.weights[id]);
    }
    // boundary data 1 everywhere
    let b = dom.system().rhs(&BoundaryData::function(|_| 1.0));
    let (x, _, _) = dom.system().solve(&b, 1e-11, 1.0).unwrap();
    let one: f64 = stencil.iter().map(|&(r, w)| w * x[r]).sum();
    assert!((one - 1.0).abs() < 1e-8);
    assert!((m.total - 1.0).abs() < 1e-6);
}

#[test]
fn pole_placement() {
    let (dom, part) = half_disk(1.0 / 16.0);
    match harmonic_measure(&dom, &[0.0, 0.01, 0.0], &part) {
        Err(Error::PolePlacement { required, .. }) => assert!((required - 0.1).abs() < 1e-15),
        other => panic!("{other:?}"),
    }
    // outside the clip ball
    assert!(matches!(
        harmonic_measure(&dom, &[0.0, 5.1, 0.0], &part),
        Err(Error::PolePlacement { .. })
    ));
}

#[test]
fn half_disk_comparison() {
    let (dom, part) = half_disk(1.0 / 32.0);
    let rep = measure_comparison(&dom, &[[0.0, 1.0, 0.0]], &part).unwrap();
    assert!(rep.flags.is_empty());
    for p in &rep.patches {
        assert!((p.sigma - 0.125).abs() < 1e-9);
        let r = p.ratio.unwrap();
        assert!(r > 0.9 / (2.0 * PI) && r < 1.0 / PI, "{r}");
    }
    assert!(rep.c_emp <= 2.2, "{}", rep.c_emp);
    assert!(rep.normalization_error() < 1e-6);
    let q = rep.nu_total / rep.sigma_total;
    assert!(q <= rep.r_max && q >= rep.r_min);
    assert!(rep.pole_harnack.is_none());
    let g = &rep.green[0];
    assert!(g.c.is_finite() && g.c > 0.0 && g.checked_nodes > 1000);
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("patch,x,y,z,sigma,nu,ratio\n"));
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn green_bound_oracle() {
    // Green function of the half-plane with pole (0, 1), (1/2π) log(|x - x̄₀|/|x - x₀|),
    // bounds the half-disk one; their ratio to y is at most 1/(π·d²) near the pole.
    let (dom, part) = half_disk(1.0 / 32.0);
    let rep = measure_comparison(&dom, &[[0.0, 1.0, 0.0]], &part).unwrap();
    let g = &rep.green[0];
    let x = g.argmax;
    let half_plane =
        ((x[0].powi(2) + (x[1] + 1.0).powi(2)) / (x[0].powi(2) + (x[1] - 1.0).powi(2))).ln() / (4.0 * PI) / x[1];
    assert!(g.c <= half_plane * 1.02, "{} vs {half_plane}", g.c);
    assert!(g.c >= 0.5 * half_plane);
}

fn quadrant(h: f64) -> (MeasureDomain, BoundaryPartition, Vec<Point>) {
    let g = GridSpec::cube(2, 5.25, h).unwrap();
    let u = ScalarField::from_fn(&g, "xy", |p| p[0] * p[1]).unwrap();
    let part = nodal_domains(&u, &Ball::centered(CLIP_RADIUS).unwrap()).unwrap();
    let id = part.domain_at(&u, &[1.0, 1.0, 0.0]).unwrap();
    let dom = MeasureDomain::new(&u, &CoefficientField::identity(&g), &part, id)
        .unwrap()
        .with_chunk_radius(0.25);
    let mask: Vec<bool> = (0..g.node_count())
        .map(|i| {
            let p = g.node_point(i);
            p[0] > 0.0 && p[1] > 0.0
        })
        .collect();
    let delta = DistanceField::from_zero_set(&g, dom.zero_set(), None).unwrap();
    let (_, chunks) = deep_chunks(&mask, &delta, 0.25, &Ball::centered(2.0).unwrap());
    let poles = chunks.iter().map(|c| c.representative).collect();
    let patches = BoundaryPartition::cubes(&dom, &Ball::centered(1.0).unwrap(), 0.125).unwrap();
    (dom, patches, poles)
}

#[test]
fn quadrant_corner() {
    let (dom, part, poles) = quadrant(1.0 / 16.0);
    assert_eq!(poles.len(), 1);
    let rep = measure_comparison(&dom, &poles, &part).unwrap();
    assert!(rep.normalization_error() < 1e-6);
    assert!(rep
        .patches
        .iter()
        .all(|p| p.ratio.is_some_and(|r| r.is_finite() && r > 0.0)));
    assert!(rep.c_emp.is_finite());
    // both densities are linear in the distance to the corner
    let corner = rep
        .patches
        .iter()
        .min_by(|a, b| {
            let da = a.center[0].hypot(a.center[1]);
            let db = b.center[0].hypot(b.center[1]);
            da.total_cmp(&db)
        })
        .unwrap();
    let smallest = rep.patches.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min);
    assert_eq!(corner.sigma, smallest);
    let ratios: Vec<f64> = rep.patches.iter().filter_map(|p| p.ratio).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    let rc = corner.ratio.unwrap();
    assert!(rc >= lo && rc <= hi);
}

#[test]
fn pole_harnack_stable() {
    let poles = [[0.0, 1.0, 0.0], [0.3, 1.3, 0.0]];
    let c: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&h| {
            let (dom, part) = half_disk(h);
            measure_comparison(&dom, &poles, &part).unwrap().pole_harnack.unwrap()
        })
        .collect();
    assert!(c[0] > 1.0 && c[0].is_finite());
    assert!((c[0] / c[1] - 1.0).abs() < 0.1, "{c:?}");
}

#[test]
fn partition_errors() {
    let (dom, part) = half_disk(1.0 / 16.0);
    let f = part.patches[0].facets[0];
    let err = BoundaryPartition::from_groups(&dom, &part.ball, vec![vec![f], vec![f]]);
    assert!(matches!(err, Err(Error::Precondition(_))));
    let err = BoundaryPartition::from_groups(&dom, &part.ball, vec![part.patches[0].facets.clone()]);
    assert!(matches!(err, Err(Error::InsufficientCoverage(_))));
    let far = Ball::new([0.0, 3.0, 0.0], 1.0).unwrap();
    assert!(matches!(
        BoundaryPartition::cubes(&dom, &far, 0.1),
        Err(Error::NoBoundary(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn enlarging_a_patch_never_decreases_weight(first in 0usize..15, extra in 1usize..4, x in -0.8f64..0.8, y in 0.6f64..2.0) {
        let (dom, part) = half_disk(1.0 / 16.0);
        let last = (first + extra).min(part.len() - 1);
        let small = part.merged(&dom, &[first]).unwrap();
        let ids: Vec<usize> = (first..=last).collect();
        let big = part.merged(&dom, &ids).unwrap();
        let pole = [x, y, 0.0];
        let ws = harmonic_measure(&dom, &pole, &small).unwrap().weights[0];
        let wb = harmonic_measure(&dom, &pole, &big).unwrap().weights[0];
        prop_assert!(wb >= ws - 1e-12);
        prop_assert!(ws >= 0.0);
    }
}
