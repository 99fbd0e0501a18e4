use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::config::CheckSpec;
use super::{Params, ParamsExt, Scenario};
use crate::boundary::{
    boundedness_report, carleson_check, frequency_transfer_check, holder_probe, iteration_decay_probe, liouville_probe,
    ratio_field, single_domain_report, BoundednessConfig, DomainView, SingleDomainConfig, TransferConfig,
};
use crate::error::{Error, Result};
use crate::field::{Ball, Point};
use crate::frequency::{doubling_index, frequency_and_h, ThreeSphereFit, ThreeSpherePoint};
use crate::harnack::{build_chains, calibrate_theta, chain_zero_set, ChainBatch, MIN_STEP_RATIO};
use crate::measure::{measure_comparison, BoundaryPartition, MeasureDomain};
use crate::nodal::{
    boundary_geometry_report, deep_chunks, nodal_domains, DistanceField, DomainPartition, GeometryConfig,
};

pub(crate) const CHECK_KINDS: &[&str] = &[
    "frequency",
    "doubling",
    "monotone",
    "three_sphere",
    "chains",
    "corkscrew_stability",
    "geometry",
    "boundedness",
    "holder",
    "transfer",
    "carleson",
    "liouville",
    "single_domain",
    "iteration_decay",
    "harmonic_measure",
];

/// Result of one check on one scenario.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub kind: String,
    pub label: String,
    pub mandatory: bool,
    pub pass: bool,
    /// Headline number for the summary table.
    pub value: Option<f64>,
    /// Named numbers, addressable from comparisons as `label.name`. Booleans are 1/0.
    pub metrics: BTreeMap<String, f64>,
    pub detail: Value,
    pub error: Option<String>,
}

impl CheckOutcome {
    pub(crate) fn failed(spec: &CheckSpec, err: &Error) -> Self {
        CheckOutcome {
            kind: spec.kind.clone(),
            label: spec.label().to_string(),
            mandatory: spec.mandatory,
            pass: false,
            value: None,
            metrics: BTreeMap::new(),
            detail: Value::Null,
            error: Some(err.to_string()),
        }
    }
}

struct Body {
    pass: bool,
    value: Option<f64>,
    metrics: BTreeMap<String, f64>,
    detail: Value,
}

impl Body {
    fn new(pass: bool, value: Option<f64>, detail: impl Serialize) -> Result<Self> {
        Ok(Body {
            pass,
            value,
            metrics: BTreeMap::new(),
            detail: serde_json::to_value(detail).map_err(|e| Error::Format(e.to_string()))?,
        })
    }

    fn metric(mut self, name: &str, v: f64) -> Self {
        self.metrics.insert(name.into(), v);
        self
    }

    fn flag(self, name: &str, b: bool) -> Self {
        self.metric(name, if b { 1.0 } else { 0.0 })
    }
}

/// Runs one check. `rebuild(h)` builds the same scenario at another spacing
/// (used by the refinement-stability checks). Errors are recorded in the
/// outcome, never propagated.
pub fn run_check(sc: &Scenario, spec: &CheckSpec, rebuild: &(dyn Fn(f64) -> Result<Scenario> + Sync)) -> CheckOutcome {
    let body = sc.residual_gate().and_then(|_| dispatch(sc, spec, rebuild));
    match body {
        Ok(b) => CheckOutcome {
            kind: spec.kind.clone(),
            label: spec.label().to_string(),
            mandatory: spec.mandatory,
            pass: b.pass,
            value: b.value,
            metrics: b.metrics,
            detail: b.detail,
            error: None,
        },
        Err(e) => CheckOutcome::failed(spec, &e),
    }
}

fn dispatch(sc: &Scenario, spec: &CheckSpec, rebuild: &(dyn Fn(f64) -> Result<Scenario> + Sync)) -> Result<Body> {
    let p = &spec.params;
    match spec.kind.as_str() {
        "frequency" => frequency(sc, spec),
        "doubling" => doubling(sc, spec),
        "monotone" => monotone(sc, spec),
        "three_sphere" => three_sphere(sc, p),
        "chains" => chains(sc, spec),
        "corkscrew_stability" => corkscrew_stability(sc, spec, rebuild),
        "geometry" => geometry(sc, p),
        "boundedness" => boundedness(sc, spec),
        "holder" => holder(sc, spec),
        "transfer" => transfer(sc, spec),
        "carleson" => carleson(sc, spec, rebuild),
        "liouville" => liouville(sc, spec),
        "single_domain" => single_domain(sc, p),
        "iteration_decay" => iteration_decay(sc, p),
        "harmonic_measure" => harmonic_measure(sc, spec),
        k => Err(Error::Config(format!("unknown check '{k}'"))),
    }
}

/// `|x − expect| ≤ tol·|expect|` (relative) or `≤ tol` (absolute).
fn near(x: f64, expect: f64, tol: f64, relative: bool) -> bool {
    let scale = if relative { expect.abs() } else { 1.0 };
    (x - expect).abs() <= tol * scale
}

fn center(p: &Params) -> Result<Point> {
    Ok(p.point("center")?.unwrap_or([0.0; 3]))
}

/// Radii that fit in the grid box about `c`.
fn fitting(sc: &Scenario, c: &Point, radii: Vec<f64>) -> Vec<f64> {
    radii
        .into_iter()
        .filter(|&r| sc.grid.contains_ball(&Ball { center: *c, radius: r }))
        .collect()
}

/// `N(c, r)` at each radius; with `expect`, all within relative `tol` (default 0.02).
fn frequency(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let c = center(p)?;
    let radii = p.f64_list("radii")?.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]);
    let radii = fitting(sc, &c, radii);
    if radii.is_empty() {
        return Err(Error::InsufficientCoverage(
            "no frequency radius fits in the grid".into(),
        ));
    }
    let prof = frequency_and_h(&sc.u, &sc.op_u, &c, &radii)?;
    let tol = spec.tol.unwrap_or(0.02);
    let worst = spec
        .expect
        .map(|e| prof.n_values.iter().map(|n| ((n - e) / e).abs()).fold(0.0, f64::max));
    let pass = worst.is_none_or(|w| w <= tol) && prof.n_values.iter().all(|n| n.is_finite());
    let mean = prof.n_values.iter().sum::<f64>() / prof.n_values.len() as f64;
    let mut b = Body::new(pass, Some(mean), &prof)?.metric("n_mean", mean);
    if let Some(w) = worst {
        b = b.metric("max_rel_error", w);
    }
    Ok(b)
}

/// `N_D(c, r)` at radii `≥ 8h`; with `expect`, all within absolute `tol` (default 0.05).
fn doubling(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let c = center(p)?;
    let radii = p.f64_list("radii")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0]);
    let h = sc.h();
    let radii: Vec<f64> = fitting(sc, &c, radii).into_iter().filter(|&r| r >= 8.0 * h).collect();
    if radii.is_empty() {
        return Err(Error::InsufficientCoverage(
            "no doubling radius fits in the grid".into(),
        ));
    }
    let nd = radii
        .iter()
        .map(|&r| doubling_index(&sc.u, &Ball { center: c, radius: r }))
        .collect::<Result<Vec<_>>>()?;
    let tol = spec.tol.unwrap_or(0.05);
    let worst = spec
        .expect
        .map(|e| nd.iter().map(|n| (n - e).abs()).fold(0.0, f64::max));
    let pass = worst.is_none_or(|w| w <= tol);
    let max = nd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut b = Body::new(pass, Some(max), serde_json::json!({ "radii": radii, "nd": nd }))?.metric("nd_max", max);
    if let Some(w) = worst {
        b = b.metric("max_abs_error", w);
    }
    Ok(b)
}

/// Largest drop of `N(r)` (with `C₂ = 0`) over the family; passes at most `tol` (default 1e-2).
fn monotone(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let c = center(p)?;
    let radii = p
        .f64_list("radii")?
        .unwrap_or_else(|| (0..=8).map(|k| 0.25 * 2f64.powf(k as f64 / 2.0)).collect());
    let radii = fitting(sc, &c, radii);
    let tol = spec.tol.unwrap_or(1e-2);
    let mut drops = Vec::new();
    for f in &sc.family {
        let prof = frequency_and_h(f, &sc.op_u, &c, &radii)?;
        let drop = prof
            .n_values
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max);
        drops.push(drop);
    }
    let worst = drops.iter().copied().fold(0.0, f64::max);
    Ok(Body::new(
        worst <= tol,
        Some(worst),
        serde_json::json!({ "radii": radii, "drops": drops }),
    )?
    .metric("worst_violation", worst))
}

/// Family fit of `(K₃, α₁)`; passes when the inequality holds at every sample and `0 < α₁ < 1`.
fn three_sphere(sc: &Scenario, p: &Params) -> Result<Body> {
    let c = center(p)?;
    let mut pts = Vec::new();
    for f in &sc.family {
        pts.extend(ThreeSpherePoint::sample(f, &c)?);
    }
    let fit = ThreeSphereFit::fit(&pts)?;
    let holds = fit.holds(&pts);
    let pass = holds && fit.alpha1 > 0.0 && fit.alpha1 < 1.0;
    Ok(Body::new(pass, Some(fit.alpha1), &fit)?
        .metric("alpha1", fit.alpha1)
        .metric("k3", fit.k3)
        .flag("holds", holds))
}

/// Start points `base + δ_k·normal + t_k·spread·tangent` with
/// `δ_k = 2^{−12 + 9k/(n−1)}` and `t_k ∈ [−1/2, 1/2]`.
fn chain_starts(p: &Params) -> Result<Vec<Point>> {
    if let Some(s) = p.points("starts")? {
        return Ok(s);
    }
    let n = p.usize_or("count", 50)?.max(2);
    let base = p.point("base")?.unwrap_or([0.0; 3]);
    let normal = p.point("normal")?.unwrap_or([1.0, 0.0, 0.0]);
    let tangent = p.point("tangent")?.unwrap_or([0.0, 1.0, 0.0]);
    let spread = p.f64_or("spread", 1.0)?;
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let d = 2f64.powf(-12.0 + 9.0 * t);
            let s = (t - 0.5) * spread;
            [0, 1, 2].map(|a| base[a] + d * normal[a] + s * tangent[a])
        })
        .collect())
}

fn chain_batch(sc: &Scenario, p: &Params) -> Result<ChainBatch> {
    let zs = chain_zero_set(&sc.u)?;
    let starts = chain_starts(p)?;
    match p.opt_f64("theta")? {
        Some(t) => build_chains(&sc.u, &zs, &starts, t),
        None => calibrate_theta(&sc.u, &zs, &starts),
    }
}

fn batch_ok(b: &ChainBatch) -> bool {
    b.failures.is_empty()
        && b.chains
            .iter()
            .all(|c| c.termination.is_some() && c.terminal_delta > 0.0)
        && b.min_ratio.is_some_and(|r| r > MIN_STEP_RATIO)
        && b.r_squared.is_some_and(|r| r >= 0.9)
}

/// Harnack chains with the length law. `expect` is the slope `ξ₁`; with
/// `predict = true` it is `1/ln(2 − θ)`. Tolerance relative (default 0.2).
fn chains(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let b = chain_batch(sc, p)?;
    let expect = match spec.expect {
        Some(e) => Some(e),
        None if p.bool_or("predict", false)? => Some(1.0 / (2.0 - b.theta).ln()),
        None => None,
    };
    let tol = spec.tol.unwrap_or(0.2);
    let xi_ok = match (expect, b.xi1) {
        (Some(e), Some(x)) => near(x, e, tol, true),
        (Some(_), None) => false,
        (None, _) => true,
    };
    let pass = batch_ok(&b) && xi_ok;
    let summary = serde_json::json!({
        "theta": b.theta,
        "xi1": b.xi1,
        "xi2": b.xi2,
        "r_squared": b.r_squared,
        "c4": b.c4,
        "min_ratio": b.min_ratio,
        "expected_xi1": expect,
        "failures": b.failures,
        "lengths": b.chains.iter().map(|c| c.len()).collect::<Vec<_>>(),
        "start_deltas": b.chains.iter().map(|c| c.deltas[0]).collect::<Vec<_>>(),
        "terminations": b.chains.iter().map(|c| c.termination).collect::<Vec<_>>(),
    });
    let mut body = Body::new(pass, b.xi1, summary)?.metric("theta", b.theta);
    for (k, v) in [
        ("xi1", b.xi1),
        ("r_squared", b.r_squared),
        ("c4", b.c4),
        ("min_ratio", b.min_ratio),
    ] {
        if let Some(v) = v {
            body = body.metric(k, v);
        }
    }
    Ok(body)
}

/// `c₄` at `h` and `h/2`; passes when the relative change is below `tol` (default 0.2).
fn corkscrew_stability(
    sc: &Scenario,
    spec: &CheckSpec,
    rebuild: &(dyn Fn(f64) -> Result<Scenario> + Sync),
) -> Result<Body> {
    let p = &spec.params;
    let fine = rebuild(sc.h() / 2.0)?;
    fine.residual_gate()?;
    let coarse = chain_batch(sc, p)?;
    let mut pf = p.clone();
    pf.insert("theta".into(), toml::Value::Float(coarse.theta));
    let refined = chain_batch(&fine, &pf)?;
    let (Some(a), Some(b)) = (coarse.c4, refined.c4) else {
        return Err(Error::CorkscrewFailure(
            "a chain batch produced no terminal points".into(),
        ));
    };
    let change = (b / a - 1.0).abs();
    let pass = change < spec.tol.unwrap_or(0.2);
    Ok(Body::new(
        pass,
        Some(change),
        serde_json::json!({ "theta": coarse.theta, "c4_h": a, "c4_h2": b }),
    )?
    .metric("c4_h", a)
    .metric("c4_h2", b)
    .metric("relative_change", change))
}

/// Partition of the scenario's level field on `B_region` and the id of the
/// domain containing `point`.
fn domain_of(sc: &Scenario, p: &Params) -> Result<(DomainPartition, usize)> {
    let level = sc.level();
    let default_region = (Scenario::normalization_radius(&sc.grid).max(sc.grid.hi()[0]) - 0.05).min(5.0);
    let region = Ball::centered(p.f64_or("region", default_region)?)?;
    let part = nodal_domains(level, &region)?;
    let point = match p.point("point")? {
        Some(x) => x,
        None => sc
            .domain_point
            .ok_or_else(|| Error::Config(format!("{} has no domain point; set 'point'", sc.label)))?,
    };
    let id = part
        .domain_at(level, &point)
        .ok_or_else(|| Error::Precondition(format!("no nodal domain at {point:?}")))?;
    Ok((part, id))
}

fn view(sc: &Scenario, part: &DomainPartition, id: usize) -> Result<DomainView> {
    let v = DomainView::from_partition(sc.level(), part, id)?;
    Ok(match sc.slab {
        Some(a) => v.with_walls(move |x| a - x[0].abs()),
        None => v,
    })
}

/// Geometry report; `expect_connected` pins the connectedness verdict.
fn geometry(sc: &Scenario, p: &Params) -> Result<Body> {
    let (part, id) = domain_of(sc, p)?;
    let mut delta = DistanceField::from_zero_set(&sc.grid, &part.zero_set, None)?;
    if let Some(a) = sc.slab {
        delta = delta.min_with(move |x| a - x[0].abs());
    }
    let mut cfg = GeometryConfig::default();
    if let Some(r) = p.opt_f64("chunk_radius")? {
        cfg.chunk_radius = r;
    }
    if let Some(d) = p.f64_list("qc_deltas")? {
        if d.len() != 2 {
            return Err(Error::Config("qc_deltas needs two values".into()));
        }
        cfg.qc_deltas = (d[0], d[1]);
    }
    if let Some(s) = p.opt_f64("qc_scale")? {
        cfg.qc_samples = vec![(p.point("qc_center")?.unwrap_or([0.0; 3]), s)];
    }
    cfg.ahlfors_max_scale = p.f64_or("ahlfors_max_scale", cfg.ahlfors_max_scale)?;
    let rep = boundary_geometry_report(sc.level(), &part, id, &delta, &cfg)?;
    let connected = rep.quantitatively_connected;
    let pass = match p.get("expect_connected") {
        Some(_) => p.bool_or("expect_connected", true)? == connected,
        None => true,
    };
    Ok(Body::new(pass, Some(rep.chunks.len() as f64), &rep)?
        .flag("connected", connected)
        .metric("chunks", rep.chunks.len() as f64)
        .metric("ahlfors_min", rep.ahlfors.min_ratio)
        .metric("ahlfors_max", rep.ahlfors.max_ratio)
        .metric("singular_points", rep.singular.count() as f64))
}

/// Upper bound for the pair `(u, v)`. `expect` pins `sup_{B₁}|v/u|` (absolute
/// `tol`, default 0.01), `expect_c` pins `C_emp` (relative `c_tol`, default
/// 0.05). With a known quotient, the ratio field must match it within
/// `quotient_tol` (default 1e-8) on the mask.
fn boundedness(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let v = sc.partner()?;
    let cfg = BoundednessConfig {
        n0: p.f64_or("n0", sc.n0_declared.unwrap_or(2.0))?,
        ..BoundednessConfig::default()
    };
    let rep = boundedness_report(v, &sc.u, &cfg)?;
    let mut pass = spec
        .expect
        .is_none_or(|e| near(rep.sup_ratio_b1, e, spec.tol.unwrap_or(0.01), false));
    if let Some(e) = p.opt_f64("expect_c")? {
        pass &= near(rep.c_emp, e, p.f64_or("c_tol", 0.05)?, true);
    }
    let mut body_quot = None;
    if let Some(q) = sc.quotient {
        let ratio = ratio_field(v, &sc.u)?;
        let g = &sc.grid;
        let err = (0..g.node_count())
            .filter_map(|i| ratio.value(i).map(|r| (r - q(&g.node_point(i))).abs()))
            .fold(0.0, f64::max);
        pass &= err <= p.f64_or("quotient_tol", 1e-8)?;
        body_quot = Some(err);
    }
    let mut b = Body::new(pass, Some(rep.sup_ratio_b1), &rep)?
        .metric("sup_ratio_b1", rep.sup_ratio_b1)
        .metric("c_emp", rep.c_emp);
    if let Some(t) = rep.two_sided_c {
        b = b.metric("two_sided_c", t);
    }
    if let Some(e) = body_quot {
        b = b.metric("quotient_error", e);
    }
    Ok(b)
}

/// Oscillation decay of `v/u`. `expect` pins `α` (absolute `tol`, default
/// 0.05); `decay_max` bounds the decay factor at scale ratio 100.
fn holder(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let v = sc.partner()?;
    let c = center(p)?;
    let scales = p.f64_list("scales")?.unwrap_or_else(|| vec![1.0, 0.5, 0.25, 0.125]);
    let prof = holder_probe(v, &sc.u, &c, &scales)?;
    let alpha = prof.alpha_fit;
    let mut pass = match (spec.expect, alpha) {
        (Some(e), Some(a)) => near(a, e, spec.tol.unwrap_or(0.05), false),
        (Some(_), None) => false,
        (None, _) => true,
    };
    if let Some(m) = p.opt_f64("decay_max")? {
        pass &= prof.decay_at_100.is_some_and(|d| d <= m);
    }
    let mut b = Body::new(pass, alpha, &prof)?;
    if let Some(a) = alpha {
        b = b.metric("alpha", a);
    }
    if let Some(d) = prof.decay_at_100 {
        b = b.metric("decay_at_100", d);
    }
    Ok(b)
}

/// Frequency transfer between `u` under `op_u` and `v` under `op_v`; `expect`
/// pins `D_emp` (absolute `tol`, default 0.05).
fn transfer(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let v = sc.partner()?;
    let defaults = TransferConfig::default();
    let cfg = TransferConfig {
        n0: p.f64_or("n0", sc.n0_declared.unwrap_or(defaults.n0))?,
        residual_tol: p.f64_or("residual_tol", defaults.residual_tol)?,
        ..defaults
    };
    let rep = frequency_transfer_check(&sc.u, v, &sc.op_u, sc.op_v(), &cfg)?;
    let pass = rep.pass
        && spec
            .expect
            .is_none_or(|e| near(rep.d_emp, e, spec.tol.unwrap_or(0.05), false));
    Ok(Body::new(pass, Some(rep.d_emp), rep)?
        .metric("d_emp", rep.d_emp)
        .metric("residual_u", rep.residual_u)
        .metric("residual_v", rep.residual_v))
}

/// Carleson constant of `u` (or the partner with `field = "v"`) at depth `c`
/// (default 0.5), recomputed at `h/2`; passes when `M_emp` is finite and
/// changes by less than `tol` (default 0.1).
fn carleson(sc: &Scenario, spec: &CheckSpec, rebuild: &(dyn Fn(f64) -> Result<Scenario> + Sync)) -> Result<Body> {
    let p = &spec.params;
    let c = p.f64_or("c", 0.5)?;
    let measure = |s: &Scenario| -> Result<f64> {
        let (part, id) = domain_of(s, p)?;
        let dom = view(s, &part, id)?;
        let f = match p.str_or("field", "u")? {
            "u" => &s.u,
            "v" => s.partner()?,
            other => return Err(Error::Config(format!("field must be 'u' or 'v', got '{other}'"))),
        };
        Ok(carleson_check(f, &dom, c)?.m_emp)
    };
    let m = measure(sc)?;
    let fine = rebuild(sc.h() / 2.0)?;
    fine.residual_gate()?;
    let m2 = measure(&fine)?;
    let change = (m2 / m - 1.0).abs();
    let pass = m.is_finite() && m2.is_finite() && change < spec.tol.unwrap_or(0.1);
    Ok(Body::new(
        pass,
        Some(m),
        serde_json::json!({ "c": c, "m_emp_h": m, "m_emp_h2": m2 }),
    )?
    .metric("m_emp", m)
    .metric("m_emp_h2", m2)
    .metric("relative_change", change))
}

/// Liouville probe on windows (default 1, 2, 4). `verdict` pins the verdict;
/// `expect` pins `c_fit` (absolute `tol`, default 1e-8); `min_growth` bounds
/// the doubling-index growth of both fields from below.
fn liouville(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let v = sc.partner()?;
    let windows = p.f64_list("windows")?.unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
    let rep = liouville_probe(&sc.u, v, &windows, sc.residual_tol)?;
    let verdict = serde_json::to_value(rep.verdict).map_err(|e| Error::Format(e.to_string()))?;
    let mut pass = match p.get("verdict") {
        Some(_) => verdict.as_str() == Some(p.str_or("verdict", "")?),
        None => true,
    };
    if let Some(e) = spec.expect {
        let tol = spec.tol.unwrap_or(1e-8);
        pass &= rep.windows.iter().all(|w| near(w.c_fit, e, tol, false));
    }
    if let Some(g) = p.opt_f64("min_growth")? {
        pass &= rep.growth_u >= g && rep.growth_v >= g;
    }
    Ok(Body::new(pass, Some(rep.c_fit), &rep)?
        .metric("c_fit", rep.c_fit)
        .metric("c_spread", rep.c_spread)
        .metric("growth_u", rep.growth_u)
        .metric("growth_v", rep.growth_v))
}

/// Single-domain constants for the positive pair on the domain at `point`.
fn single_domain(sc: &Scenario, p: &Params) -> Result<Body> {
    let (part, id) = domain_of(sc, p)?;
    let dom = view(sc, &part, id)?;
    let defaults = SingleDomainConfig::default();
    let cfg = SingleDomainConfig {
        r: p.f64_or("r", defaults.r)?,
        n0: p.f64_or("n0", defaults.n0)?,
    };
    let rep = single_domain_report(&sc.u, sc.partner()?, &dom, &cfg)?;
    let pass = rep.c2_over_c1.is_finite() && rep.m_emp.is_finite();
    Ok(Body::new(pass, Some(rep.c2_over_c1), &rep)?
        .metric("c2_over_c1", rep.c2_over_c1)
        .metric("m_emp", rep.m_emp)
        .metric("chunks", rep.chunks as f64)
        .metric("chunk_bound_c", rep.chunk_bound_c))
}

/// Iteration decay of `u` (or `v`) with `m0` and `delta`.
fn iteration_decay(sc: &Scenario, p: &Params) -> Result<Body> {
    let (part, id) = domain_of(sc, p)?;
    let dom = view(sc, &part, id)?;
    let f = match p.str_or("field", "u")? {
        "u" => &sc.u,
        "v" => sc.partner()?,
        other => return Err(Error::Config(format!("field must be 'u' or 'v', got '{other}'"))),
    };
    let rep = iteration_decay_probe(f, &dom, p.f64_or("m0", 1.0)?, p.f64_or("delta", 0.1)?)?;
    Ok(Body::new(rep.pass, Some(rep.a_emp), &rep)?.metric("a_emp", rep.a_emp))
}

/// Harmonic measure against `|∇u| dH^{n-1}` on `∂Ω ∩ B₁`. Poles default to
/// the chunk representatives of `{δ ≥ r} ∩ B₂`. Passes when the
/// normalization error is at most `norm_tol` (default 1e-6), no patch is
/// flagged and `C_emp ≤ expect` if given.
fn harmonic_measure(sc: &Scenario, spec: &CheckSpec) -> Result<Body> {
    let p = &spec.params;
    let (part, id) = domain_of(sc, p)?;
    let r = p.f64_or("chunk_radius", 0.25)?;
    let dom = MeasureDomain::new(&sc.u, &sc.op_u, &part, id)?
        .with_chunk_radius(r)
        .with_tolerance(p.f64_or("solve_tol", crate::measure::MEASURE_TOL)?);
    let patches = BoundaryPartition::cubes(&dom, &Ball::centered(1.0)?, p.f64_or("side", 0.125)?)?;
    let poles = match p.points("poles")? {
        Some(ps) => ps,
        None => {
            let mut delta = DistanceField::from_zero_set(&sc.grid, &part.zero_set, None)?;
            if let Some(a) = sc.slab {
                delta = delta.min_with(move |x| a - x[0].abs());
            }
            let mask = part.node_mask(sc.level(), id);
            deep_chunks(&mask, &delta, r, &Ball::centered(2.0)?)
                .1
                .iter()
                .map(|c| c.representative)
                .collect()
        }
    };
    let rep = measure_comparison(&dom, &poles, &patches)?;
    let norm = rep.normalization_error();
    let pass =
        norm <= p.f64_or("norm_tol", 1e-6)? && rep.flags.is_empty() && spec.expect.is_none_or(|e| rep.c_emp <= e);
    let green = rep.green.iter().map(|g| g.c).fold(0.0, f64::max);
    let mut b = Body::new(pass, Some(rep.c_emp), &rep)?
        .metric("c_emp", rep.c_emp)
        .metric("r_max", rep.r_max)
        .metric("r_min", rep.r_min)
        .metric("normalization_error", norm)
        .metric("poles", poles.len() as f64)
        .metric("green_c", green)
        .metric("total_in_b1", rep.measures[0].total_in_b1);
    if let Some(ph) = rep.pole_harnack {
        b = b.metric("pole_harnack", ph);
    }
    Ok(b)
}
