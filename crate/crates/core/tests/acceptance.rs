//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nodalab::boundary::{
    boundedness_report, holder_probe, liouville_probe, ratio_field, BoundednessConfig, LiouvilleVerdict,
};
use nodalab::frequency::{doubling_index, frequency_and_h};
use nodalab::harnack::{build_chains, calibrate_theta, chain_zero_set, ChainBatch, MIN_STEP_RATIO};
use nodalab::measure::{measure_comparison, BoundaryPartition, MeasureDomain, CLIP_RADIUS};
use nodalab::nodal::nodal_domains;
use nodalab::scenario::{build_scenario, run_check, run_suite_with_workers, CheckSpec, Params, Scenario, SuiteConfig};
use nodalab::{Ball, CoefficientField, GridSpec, Point, ScalarField};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn params(text: &str) -> Params {
    toml::from_str(text).expect("inline parameters parse")
}

fn scenario(kind: &str, text: &str) -> Result<Scenario, String> {
    build_scenario(kind, &params(text)).map_err(e2s)
}

/// Runs one registered check; a check error becomes the failure message.
fn check(sc: &Scenario, kind: &str, text: &str) -> Result<nodalab::scenario::CheckOutcome, String> {
    let kind_line = format!("kind = '{kind}'\n{text}");
    let spec: CheckSpec = toml::from_str(&kind_line).map_err(e2s)?;
    let rebuild = |h: f64| nodalab::scenario::build_scenario_with(&sc.kind, &sc.params, Some(h));
    let out = run_check(sc, &spec, &rebuild);
    match &out.error {
        Some(e) => Err(format!("{kind}: {e}")),
        None => Ok(out),
    }
}

fn metric(out: &nodalab::scenario::CheckOutcome, key: &str) -> Result<f64, String> {
    out.metrics
        .get(key)
        .copied()
        .ok_or_else(|| format!("{} has no metric '{key}'", out.label))
}

/// `x`, `xy` and `Re (x + iy)³`, written out.
fn homogeneous(d: usize, p: &Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    match d {
        1 => x,
        2 => x * y,
        3 => x * x * x - 3.0 * x * y * y,
        _ => unreachable!(),
    }
}

const RADII: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

fn poly_fields(h: f64) -> Result<Vec<ScalarField>, String> {
    let g = GridSpec::cube(2, 4.25, h).map_err(e2s)?;
    (1..=3)
        .map(|d| ScalarField::from_fn(&g, format!("p{d}"), |p| homogeneous(d, p)).map_err(e2s))
        .collect()
}

fn c1_frequency() -> Outcome {
    let start = Instant::now();
    let fields = poly_fields(1.0 / 128.0)?;
    let mut worst = 0.0f64;
    for (k, f) in fields.iter().enumerate() {
        let d = (k + 1) as f64;
        let prof = frequency_and_h(f, &CoefficientField::identity(f.grid()), &[0.0; 3], &RADII).map_err(e2s)?;
        ensure(prof.radii.len() == RADII.len(), "a radius was dropped")?;
        for (r, n) in prof.radii.iter().zip(&prof.n_values) {
            let rel = (n / d - 1.0).abs();
            worst = worst.max(rel);
            ensure(rel <= 0.02, format!("d = {d}, r = {r}: N = {n}"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("max |N/d - 1| = {worst:.2e}, {secs:.1} s"))
}

fn c2_doubling() -> Outcome {
    let fields = poly_fields(1.0 / 128.0)?;
    let mut worst = 0.0f64;
    for (k, f) in fields.iter().enumerate() {
        // sup_{B_r} / sup_{B_{r/2}} = 2^d for a degree-d homogeneous polynomial
        let d = (k + 1) as f64;
        for r in RADII {
            let nd = doubling_index(f, &Ball::centered(r).map_err(e2s)?).map_err(e2s)?;
            worst = worst.max((nd - d).abs());
            ensure((nd - d).abs() <= 0.05, format!("d = {d}, r = {r}: N_D = {nd}"))?;
        }
    }
    Ok(format!("max |N_D - d| = {worst:.2e}"))
}

fn random_family() -> Result<Scenario, String> {
    scenario("random_harmonic", "deg = 4\ncount = 10\nseed = 7\nh = 0.015625")
}

fn c3_monotone() -> Outcome {
    let sc = random_family()?;
    sc.residual_gate().map_err(e2s)?;
    let radii: Vec<f64> = (0..9).map(|k| 0.25 * 2f64.powf(k as f64 / 2.0)).collect();
    let mut worst = 0.0f64;
    for f in &sc.family {
        let prof = frequency_and_h(f, &sc.op_u, &[0.0; 3], &radii).map_err(e2s)?;
        for w in prof.n_values.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    ensure(worst <= 1e-2, format!("largest drop of N(r) is {worst:e}"))?;
    let out = check(&sc, "monotone", "tol = 1e-2")?;
    ensure(out.pass, "monotone check disagrees")?;
    Ok(format!("{} members, largest drop {worst:.2e}", sc.family.len()))
}

fn c4_three_spheres() -> Outcome {
    let sc = random_family()?;
    let out = check(&sc, "three_sphere", "")?;
    let alpha = metric(&out, "alpha1")?;
    let holds = metric(&out, "holds")? == 1.0;
    ensure(holds, "inequality fails at some sample")?;
    ensure(alpha > 0.0 && alpha < 1.0, format!("alpha1 = {alpha}"))?;
    Ok(format!("alpha1 = {alpha:.4}, K3 = {:.4}", metric(&out, "k3")?))
}

/// Starts at depths `2^{-12} … 2^{-3}` spread along the zero line through `base`.
fn chain_starts(base: Point, normal: Point, tangent: Point) -> Vec<Point> {
    let n = 50;
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let d = 2f64.powf(-12.0 + 9.0 * t);
            [0, 1, 2].map(|a| base[a] + d * normal[a] + (t - 0.5) * tangent[a])
        })
        .collect()
}

fn chains_for(d: usize, h: f64) -> Result<ChainBatch, String> {
    let g = GridSpec::cube(2, 3.25, h).map_err(e2s)?;
    let f = ScalarField::from_fn(&g, "w", |p| homogeneous(d, p)).map_err(e2s)?;
    let zs = chain_zero_set(&f).map_err(e2s)?;
    let starts = if d == 1 {
        chain_starts([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    } else {
        chain_starts([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0])
    };
    calibrate_theta(&f, &zs, &starts).map_err(e2s)
}

fn batch_ok(name: &str, b: &ChainBatch) -> Result<(), String> {
    ensure(b.failures.is_empty(), format!("{name}: failures {:?}", b.failures))?;
    ensure(
        b.chains
            .iter()
            .all(|c| c.termination.is_some() && c.terminal_delta > 0.0),
        format!("{name}: a chain did not terminate at positive depth"),
    )?;
    let r = b.min_ratio.unwrap_or(0.0);
    ensure(r > MIN_STEP_RATIO, format!("{name}: min step ratio {r}"))?;
    let r2 = b.r_squared.unwrap_or(0.0);
    ensure(r2 >= 0.9, format!("{name}: R² = {r2}"))
}

fn c5_harnack_chain() -> Outcome {
    let bx = chains_for(1, 1.0 / 128.0)?;
    let bxy = chains_for(2, 1.0 / 128.0)?;
    batch_ok("x", &bx)?;
    batch_ok("xy", &bxy)?;
    // each step from x multiplies the depth by 2 - θ
    let predicted = 1.0 / (2.0 - bx.theta).ln();
    let xi1 = bx.xi1.ok_or("no fit for x")?;
    ensure(
        (xi1 / predicted - 1.0).abs() <= 0.2,
        format!("xi1 = {xi1}, predicted {predicted}"),
    )?;
    Ok(format!(
        "xi1 = {xi1:.4} vs {predicted:.4} (θ = {}), R² = {:.4} / {:.4}",
        bx.theta,
        bx.r_squared.unwrap_or(0.0),
        bxy.r_squared.unwrap_or(0.0)
    ))
}

fn c6_corkscrew() -> Outcome {
    let mut report = Vec::new();
    for d in [1, 2] {
        let coarse = chains_for(d, 1.0 / 64.0)?;
        let g = GridSpec::cube(2, 3.25, 1.0 / 128.0).map_err(e2s)?;
        let f = ScalarField::from_fn(&g, "w", |p| homogeneous(d, p)).map_err(e2s)?;
        let starts: Vec<Point> = coarse.chains.iter().map(|c| c.points[0]).collect();
        let fine = build_chains(&f, &chain_zero_set(&f).map_err(e2s)?, &starts, coarse.theta).map_err(e2s)?;
        let (a, b) = (coarse.c4.ok_or("no c4")?, fine.c4.ok_or("no c4")?);
        let change = (b / a - 1.0).abs();
        ensure(change < 0.2, format!("d = {d}: c4 {a} -> {b}"))?;
        report.push(format!("c4 {a:.4} -> {b:.4}"));
    }
    Ok(report.join(", "))
}

fn product_pair(h: f64, half: f64) -> Result<(ScalarField, ScalarField), String> {
    let g = GridSpec::cube(2, half, h).map_err(e2s)?;
    let u = ScalarField::from_fn(&g, "xy", |p| p[0] * p[1]).map_err(e2s)?;
    let v = ScalarField::from_fn(&g, "xy(x²-y²)", |p| p[0] * p[1] * (p[0] * p[0] - p[1] * p[1])).map_err(e2s)?;
    Ok((u, v))
}

fn c7_boundary_harnack() -> Outcome {
    let (u, v) = product_pair(1.0 / 64.0, 8.25)?;
    let rep = boundedness_report(
        &v,
        &u,
        &BoundednessConfig {
            n0: 4.0,
            ..BoundednessConfig::default()
        },
    )
    .map_err(e2s)?;
    // sup_{B₁}|x² − y²| = 1, sup_{B₈}|xy| = 32, sup_{B₈}|xy(x² − y²)| = 8⁴/4
    let c_exact = 1.0 * 32.0 / (8f64.powi(4) / 4.0);
    ensure(
        (rep.sup_ratio_b1 - 1.0).abs() <= 0.01,
        format!("sup ratio {}", rep.sup_ratio_b1),
    )?;
    ensure(
        (rep.c_emp / c_exact - 1.0).abs() <= 0.05,
        format!("C_emp {} vs {c_exact}", rep.c_emp),
    )?;
    let ratio = ratio_field(&v, &u).map_err(e2s)?;
    let g = u.grid();
    let err = (0..g.node_count())
        .filter_map(|i| {
            let p = g.node_point(i);
            ratio.value(i).map(|r| (r - (p[0] * p[0] - p[1] * p[1])).abs())
        })
        .fold(0.0, f64::max);
    ensure(err <= 1e-8, format!("ratio field error {err:e}"))?;
    Ok(format!(
        "sup ratio {:.4}, C_emp {:.5} (exact {c_exact}), quotient error {err:.1e}",
        rep.sup_ratio_b1, rep.c_emp
    ))
}

fn c8_holder() -> Outcome {
    let (u, v) = product_pair(1.0 / 128.0, 1.25)?;
    let prof = holder_probe(&v, &u, &[0.0; 3], &[1.0, 0.5, 0.25, 0.125]).map_err(e2s)?;
    let alpha = prof.alpha_fit.ok_or("no fit")?;
    let decay = prof.decay_at_100.ok_or("no decay factor")?;
    ensure((alpha - 2.0).abs() <= 0.05, format!("alpha = {alpha}"))?;
    ensure(decay <= 0.01, format!("decay at 100 = {decay}"))?;
    Ok(format!("alpha = {alpha:.4}, decay at 100 = {decay:.2e}"))
}

fn c9_transfer() -> Outcome {
    let sc = scenario("operator_pair_h", "h = 0.0078125")?;
    let out = check(&sc, "transfer", "residual_tol = 1e-8")?;
    let (ru, rv) = (metric(&out, "residual_u")?, metric(&out, "residual_v")?);
    ensure(ru <= 1e-8 && rv <= 1e-8, format!("residuals {ru:e}, {rv:e}"))?;
    ensure(out.pass, "transfer check failed")?;
    // div(h(x² − y²)∇(xy)) = h'·(2x·y − 2y·x) = 0, so v = xy and D = 2
    let d = metric(&out, "d_emp")?;
    ensure((d - 2.0).abs() <= 0.05, format!("D_emp = {d}"))?;
    Ok(format!("D_emp = {d:.4}, residuals {ru:.1e} / {rv:.1e}"))
}

fn c10_carleson() -> Outcome {
    let mut report = Vec::new();
    for (name, kind, text) in [
        ("quadrant", "harmonic_poly", "d = 2\nh = 0.0078125"),
        ("half-plane", "halfplane_poisson", "h = 0.03125"),
    ] {
        let sc = scenario(kind, text)?;
        let out = check(&sc, "carleson", "tol = 0.1")?;
        let (m, m2) = (metric(&out, "m_emp")?, metric(&out, "m_emp_h2")?);
        ensure(m.is_finite() && m2.is_finite(), format!("{name}: M_emp {m}, {m2}"))?;
        ensure((m2 / m - 1.0).abs() <= 0.1, format!("{name}: M_emp {m} -> {m2}"))?;
        report.push(format!("{name} {m:.4} -> {m2:.4}"));
    }
    Ok(report.join(", "))
}

fn c11_liouville() -> Outcome {
    let g = GridSpec::cube(2, 4.25, 1.0 / 64.0).map_err(e2s)?;
    let u = ScalarField::from_fn(&g, "xy", |p| p[0] * p[1]).map_err(e2s)?;
    let v = u.scaled(3.0);
    let rep = liouville_probe(&u, &v, &[1.0, 2.0, 4.0], 1e-8).map_err(e2s)?;
    ensure(
        rep.verdict == LiouvilleVerdict::Proportional,
        format!("verdict {:?}", rep.verdict),
    )?;
    for w in &rep.windows {
        ensure(
            (w.c_fit - 3.0).abs() <= 1e-8,
            format!("r = {}: c = {}", w.radius, w.c_fit),
        )?;
    }
    let sc = scenario("exp_family", "a = 1\nb = 0\nh = 0.0625")?;
    sc.residual_gate().map_err(e2s)?;
    let e = liouville_probe(&sc.u, sc.partner().map_err(e2s)?, &[1.0, 4.0], sc.residual_tol).map_err(e2s)?;
    ensure(
        e.verdict == LiouvilleVerdict::FrequencyUnbounded,
        format!("exp verdict {:?}", e.verdict),
    )?;
    ensure(
        e.growth_u >= 0.5 && e.growth_v >= 0.5,
        format!("growth {} / {}", e.growth_u, e.growth_v),
    )?;
    Ok(format!(
        "c = {:.10}, exp growth {:.3} / {:.3}",
        rep.c_fit, e.growth_u, e.growth_v
    ))
}

/// Harmonic measure of `[a, b]` on the diameter of the upper half-disk of
/// radius `r` seen from `(0, t)`, through `z ↦ -(z/r + r/z)` onto the upper half-plane.
fn half_disk_weight(a: f64, b: f64, r: f64, t: f64) -> f64 {
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

fn c12_harmonic_measure() -> Outcome {
    let start = Instant::now();
    let h = 1.0 / 128.0;
    // offset by h/2 so that {y = 0} runs between node rows
    let g = GridSpec::from_box(2, &[-5.25, -0.5 - h / 2.0], &[5.25, 5.25 + h / 2.0], h).map_err(e2s)?;
    let y = ScalarField::from_fn(&g, "y", |p| p[1]).map_err(e2s)?;
    let part = nodal_domains(&y, &Ball::centered(CLIP_RADIUS).map_err(e2s)?).map_err(e2s)?;
    let id = part.domain_at(&y, &[0.0, 1.0, 0.0]).ok_or("no upper domain")?;
    let dom = MeasureDomain::new(&y, &CoefficientField::identity(&g), &part, id)
        .map_err(e2s)?
        .with_chunk_radius(0.2);
    let patches = BoundaryPartition::cubes(&dom, &Ball::centered(1.0).map_err(e2s)?, 0.125).map_err(e2s)?;
    ensure(patches.len() == 16, format!("{} patches", patches.len()))?;
    let rep = measure_comparison(&dom, &[[0.0, 1.0, 0.0]], &patches).map_err(e2s)?;
    let m = &rep.measures[0];
    let mut worst = 0.0f64;
    for (k, w) in m.weights.iter().enumerate() {
        let a = -1.0 + k as f64 / 8.0;
        let exact = half_disk_weight(a, a + 0.125, CLIP_RADIUS, 1.0);
        worst = worst.max((w / exact - 1.0).abs());
    }
    ensure(worst <= 0.02, format!("worst patch error {worst:.4}"))?;
    ensure(rep.c_emp <= 2.5, format!("C_emp = {}", rep.c_emp))?;
    let norm = rep.normalization_error();
    ensure(norm <= 1e-6, format!("normalization error {norm:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "worst patch error {:.2}%, C_emp {:.3}, normalization {norm:.1e}, {secs:.1} s",
        100.0 * worst,
        rep.c_emp
    ))
}

const NECK_SUITE: &str = r#"
[global]
h = 0.0078125

[[scenario]]
id = "wide"
kind = "neck"
eps = 0.1
[[scenario.check]]
kind = "single_domain"
[[scenario.check]]
kind = "geometry"
qc_scale = 1.0
ahlfors_max_scale = 0.25

[[scenario]]
id = "thin"
kind = "neck"
eps = 0.001
[[scenario.check]]
kind = "single_domain"
[[scenario.check]]
kind = "geometry"
qc_scale = 1.0
ahlfors_max_scale = 0.25
"#;

fn c13_neck() -> Outcome {
    let cfg = SuiteConfig::from_toml(NECK_SUITE).map_err(e2s)?;
    let bundle = run_suite_with_workers(&cfg, None).map_err(e2s)?;
    let get = |id: &str, label: &str, key: &str| -> Result<f64, String> {
        let s = bundle.scenarios.iter().find(|s| s.id == id).ok_or("missing scenario")?;
        let c = s.checks.iter().find(|c| c.label == label).ok_or("missing check")?;
        if let Some(e) = &c.error {
            return Err(format!("{id}/{label}: {e}"));
        }
        metric(c, key)
    };
    let (wide, thin) = (
        get("wide", "single_domain", "c2_over_c1")?,
        get("thin", "single_domain", "c2_over_c1")?,
    );
    let (cw, ct) = (
        get("wide", "geometry", "connected")?,
        get("thin", "geometry", "connected")?,
    );
    ensure(thin >= 10.0 * wide, format!("C2/C1 {wide} -> {thin}"))?;
    ensure(cw == 1.0 && ct == 0.0, format!("connected {cw} -> {ct}"))?;
    Ok(format!("C2/C1 grows {:.3e}x, connected true -> false", thin / wide))
}

fn c14_determinism() -> Outcome {
    let text = include_str!("../../../configs/suite.toml");
    let cfg = SuiteConfig::from_toml(text).map_err(e2s)?;
    let a = run_suite_with_workers(&cfg, Some(1))
        .map_err(e2s)?
        .to_json()
        .map_err(e2s)?;
    let b = run_suite_with_workers(&cfg, Some(4))
        .map_err(e2s)?
        .to_json()
        .map_err(e2s)?;
    ensure(a == b, "bundles differ")?;
    Ok(format!("{} bytes identical with 1 and 4 workers", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("frequency exactness", c1_frequency),
        ("doubling index calibration", c2_doubling),
        ("frequency monotonicity", c3_monotone),
        ("three spheres", c4_three_spheres),
        ("Harnack chains", c5_harnack_chain),
        ("corkscrew stability", c6_corkscrew),
        ("boundary Harnack", c7_boundary_harnack),
        ("Hölder decay", c8_holder),
        ("frequency transfer", c9_transfer),
        ("Carleson", c10_carleson),
        ("Liouville", c11_liouville),
        ("harmonic measure", c12_harmonic_measure),
        ("neck blow-up", c13_neck),
        ("determinism", c14_determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = run();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
