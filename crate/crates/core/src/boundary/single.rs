use serde::Serialize;

use super::BAND_SPACINGS;
use crate::error::{Error, Result};
use crate::field::{add_scaled, sphere, Ball, Point, ScalarField};
use crate::nodal::{deep_chunks, total_signs, DistanceField, DomainPartition};
use crate::util::fit_line;

/// Relative tolerance for "vanishes on the boundary" and "positive on the domain".
pub const TRACE_TOL: f64 = 1e-6;

/// One domain as a node set with `δ = dist(·, ∂Ω)` and sample points of the
/// part of `∂Ω` that belongs to the zero set.
#[derive(Clone, Debug)]
pub struct DomainView {
    nodes: Vec<bool>,
    delta: DistanceField,
    boundary: Vec<Point>,
}

impl DomainView {
    pub fn new(nodes: Vec<bool>, delta: DistanceField, boundary: Vec<Point>) -> Result<Self> {
        if nodes.len() != delta.grid().node_count() {
            return Err(Error::GridMismatch);
        }
        let nodes = nodes
            .iter()
            .enumerate()
            .map(|(i, &m)| m && delta.value(i) > 0.0)
            .collect();
        Ok(DomainView { nodes, delta, boundary })
    }

    /// Domain `id` of a partition: corners of its cells that carry its sign.
    pub fn from_partition(field: &ScalarField, partition: &DomainPartition, id: usize) -> Result<Self> {
        let dom = partition
            .domains
            .get(id)
            .ok_or_else(|| Error::Precondition(format!("no domain with id {id}")))?;
        let signs = total_signs(field);
        let mask = partition.node_mask(field, id);
        let nodes = mask.iter().zip(&signs).map(|(&m, &s)| m && s == dom.sign).collect();
        let delta = DistanceField::from_zero_set(field.grid(), &partition.zero_set, None)?;
        let boundary = dom
            .boundary_facets
            .iter()
            .map(|&f| partition.zero_set.facets[f].centroid())
            .collect();
        DomainView::new(nodes, delta, boundary)
    }

    /// Adds walls: `δ ← min(δ, wall)`, dropping nodes where the wall distance is not positive.
    pub fn with_walls<F: Fn(&Point) -> f64 + Sync>(self, wall: F) -> Self {
        let delta = self.delta.min_with(wall);
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &m)| m && delta.value(i) > 0.0)
            .collect();
        DomainView {
            nodes,
            delta,
            boundary: self.boundary,
        }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.nodes[idx]
    }

    pub fn nodes(&self) -> &[bool] {
        &self.nodes
    }

    pub fn delta(&self) -> &DistanceField {
        &self.delta
    }

    pub fn boundary_points(&self) -> &[Point] {
        &self.boundary
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        if f.grid() != self.delta.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Maximum of `g(v)` over domain nodes in `ball` and sphere samples whose
    /// cell has all corners in the domain.
    fn sup_in(&self, v: &ScalarField, ball: &Ball, g: impl Fn(f64) -> f64) -> Option<f64> {
        let grid = v.grid();
        let mut m: Option<f64> = None;
        let mut take = |x: f64| m = Some(m.map_or(x, |m| m.max(x)));
        grid.for_each_node_in_ball(ball, |i, _| {
            if self.nodes[i] {
                take(g(v.value(i)));
            }
        });
        for d in sphere::default_sup_directions(grid.dim()) {
            let p = add_scaled(&ball.center, ball.radius, d);
            let Ok((cell, _)) = grid.locate(&p) else { continue };
            let inside = (0..grid.corners_per_cell()).all(|k| self.nodes[grid.index_of(grid.corner(cell, k))]);
            if inside {
                if let Ok(x) = v.eval(&p) {
                    take(g(x));
                }
            }
        }
        m
    }

    fn min_node_in(&self, v: &ScalarField, ball: &Ball) -> Option<f64> {
        let mut m: Option<f64> = None;
        v.grid().for_each_node_in_ball(ball, |i, _| {
            if self.nodes[i] {
                m = Some(m.map_or(v.value(i), |m: f64| m.min(v.value(i))));
            }
        });
        m
    }

    /// Nodes of the far set `{δ ≥ r} ∩ ball`.
    fn far_nodes(&self, ball: &Ball, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.delta.grid().for_each_node_in_ball(ball, |i, _| {
            if self.nodes[i] && self.delta.value(i) >= r {
                out.push(i);
            }
        });
        out
    }

    /// `max |v|` over boundary samples in `ball` against `sup_{Ω∩ball} |v|`.
    fn trace_violation(&self, v: &ScalarField, ball: &Ball) -> Option<String> {
        let sup = self.sup_in(v, ball, f64::abs).unwrap_or(0.0);
        let (worst, at) = self
            .boundary
            .iter()
            .filter(|p| ball.contains(p))
            .filter_map(|p| v.eval(p).ok().map(|x| (x.abs(), *p)))
            .fold((0.0, [0.0; 3]), |a, b| if b.0 > a.0 { b } else { a });
        (worst > TRACE_TOL * sup).then(|| format!("boundary value {worst:e} at {at:?} exceeds {TRACE_TOL:e}·{sup:e}"))
    }

    fn positivity_violation(&self, v: &ScalarField, ball: &Ball) -> Option<String> {
        let sup = self.sup_in(v, ball, f64::abs).unwrap_or(0.0);
        let min = self.min_node_in(v, ball)?;
        (min < -TRACE_TOL * sup).then(|| format!("'{}' takes the value {min:e} in the domain", v.label()))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CarlesonReport {
    pub c: f64,
    pub inner_sup: f64,
    pub far_sup: f64,
    pub far_point: Point,
    /// `sup_{B_{1/2}∩Ω} v ÷ sup_{B₂∩Ω, δ ≥ c} v`.
    pub m_emp: f64,
}

/// Carleson constant of a positive solution vanishing on `∂Ω ∩ B₃`.
pub fn carleson_check(v: &ScalarField, domain: &DomainView, c: f64) -> Result<CarlesonReport> {
    domain.check_grid(v)?;
    let h = v.grid().spacing();
    if c <= 4.0 * h {
        return Err(Error::Precondition(format!("c = {c} must exceed 4h = {}", 4.0 * h)));
    }
    let b3 = Ball::centered(3.0)?;
    if let Some(msg) = domain
        .positivity_violation(v, &b3)
        .or_else(|| domain.trace_violation(v, &b3))
    {
        return Err(Error::Precondition(msg));
    }
    let inner_sup = domain
        .sup_in(v, &Ball::centered(0.5)?, |x| x)
        .ok_or_else(|| Error::EmptyIntersection("domain misses B_{1/2}".into()))?;
    let g = v.grid();
    let far = domain.far_nodes(&Ball::centered(2.0)?, c);
    let best = far
        .iter()
        .copied()
        .reduce(|a, b| if v.value(b) > v.value(a) { b } else { a });
    let Some(best) = best else {
        return Err(Error::CorkscrewFailure(format!("no domain node of B₂ with δ ≥ {c}")));
    };
    let far_sup = v.value(best);
    Ok(CarlesonReport {
        c,
        inner_sup,
        far_sup,
        far_point: g.node_point(best),
        m_emp: inner_sup / far_sup,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationDecayReport {
    pub m0: f64,
    pub delta: f64,
    /// `min_{A_{1/2}} w / M₀`: the largest `a` with `w ≥ M₀·a` on `A_{1/2}`.
    pub a_emp: f64,
    pub min_a_half: f64,
    pub min_k_half: f64,
    /// `w ≥ −a_emp` on `K_{1/2}` and `a_emp > 0`.
    pub pass: bool,
    /// Unmet hypotheses; empty when the probe applies.
    pub violations: Vec<String>,
}

/// One step of the decay iteration on cubes `Q_s = {|x|_∞ ≤ s}`, with
/// `K_s = Ω ∩ Q_s` and `A_s = {x ∈ K_s : δ(x) ≥ δ·s}`.
pub fn iteration_decay_probe(
    w: &ScalarField,
    domain: &DomainView,
    m0: f64,
    delta: f64,
) -> Result<IterationDecayReport> {
    domain.check_grid(w)?;
    if !(m0 > 0.0 && delta > 0.0) {
        return Err(Error::Precondition(format!(
            "M₀ = {m0} and δ = {delta} must be positive"
        )));
    }
    let g = w.grid();
    let dim = g.dim();
    let in_cube = |p: &Point, s: f64| (0..dim).all(|a| p[a].abs() <= s);
    // nodes of K_s and A_s
    let (mut min_a1, mut min_k1, mut min_a_half, mut min_k_half) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut sup_k1: f64 = 0.0;
    for i in 0..g.node_count() {
        if !domain.contains(i) {
            continue;
        }
        let p = g.node_point(i);
        if !in_cube(&p, 1.0) {
            continue;
        }
        let x = w.value(i);
        let d = domain.delta.value(i);
        sup_k1 = sup_k1.max(x.abs());
        min_k1 = min_k1.min(x);
        if d >= delta {
            min_a1 = min_a1.min(x);
        }
        if in_cube(&p, 0.5) {
            min_k_half = min_k_half.min(x);
            if d >= delta * 0.5 {
                min_a_half = min_a_half.min(x);
            }
        }
    }
    if !min_a_half.is_finite() {
        return Err(Error::EmptyIntersection("A_{1/2} has no grid node".into()));
    }
    let slack = 1e-9;
    let mut violations = Vec::new();
    let q1_trace = domain
        .boundary
        .iter()
        .filter(|p| in_cube(p, 1.0))
        .filter_map(|p| w.eval(p).ok())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    if q1_trace > TRACE_TOL * sup_k1 {
        violations.push(format!("w does not vanish on ∂Ω ∩ Q₁ (max {q1_trace:e})"));
    }
    if min_a1 < m0 * (1.0 - slack) {
        violations.push(format!("min over A₁ is {min_a1}, below M₀ = {m0}"));
    }
    if min_k1 < -1.0 - slack {
        violations.push(format!("min over K₁ is {min_k1}, below −1"));
    }
    let a_emp = min_a_half / m0;
    let pass = violations.is_empty() && a_emp > 0.0 && min_k_half >= -a_emp * (1.0 + slack);
    Ok(IterationDecayReport {
        m0,
        delta,
        a_emp,
        min_a_half,
        min_k_half,
        pass,
        violations,
    })
}

#[derive(Clone, Debug)]
pub struct SingleDomainConfig {
    /// Depth `r` of the far set `{δ ≥ r} ∩ B₂`; also the chunk radius.
    pub r: f64,
    pub n0: f64,
}

impl Default for SingleDomainConfig {
    fn default() -> Self {
        SingleDomainConfig { r: 0.1, n0: 2.0 }
    }
}

/// Envelope fit of `v` against powers of `δ` on `B_{1/4} ∩ Ω`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthControl {
    /// Slope of `log min v` against `log δ` over log-spaced `δ` bins.
    pub lower_exponent: Option<f64>,
    /// Slope of `log max v` against `log δ`.
    pub upper_exponent: Option<f64>,
    /// Smallest `C` with `C⁻¹·δ^{N₀}·inf_{far} v ≤ v`.
    pub lower_c: f64,
    /// Smallest `C` with `v ≤ C·δ^α·sup_{B₁∩Ω} v`, `α` the upper exponent clamped to `[0, 1]`.
    pub upper_c: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingleDomainReport {
    pub r: f64,
    pub far_nodes: usize,
    /// `C₁ ≤ u, v ≤ C₂` on the far set.
    pub c1: f64,
    pub c2: f64,
    pub c2_over_c1: f64,
    /// Extremes of `v/u` on `B_{1/4} ∩ Ω` at depth `≥ 2h`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Smallest `M ≥ 1` with `(C₁/C₂)M⁻² ≤ v/u ≤ (C₂/C₁)M²` on `B_{1/4} ∩ Ω`.
    pub m_emp: f64,
    /// Smallest `M` with `|v/u| ≤ M·sup_{B₁∩Ω}|v| / inf_{far} u` on `B_{1/4} ∩ Ω`.
    pub m_growth: f64,
    pub growth: GrowthControl,
    pub chunks: usize,
    /// `sup_{B_{1/4}} v/u ÷ max_i (v/u)(xᵢ)` over chunk representatives.
    pub chunk_bound_c: f64,
}

const GROWTH_BINS: usize = 8;

fn growth_control(
    v: &ScalarField,
    domain: &DomainView,
    samples: &[usize],
    inf_far: f64,
    sup_b1: f64,
    n0: f64,
) -> GrowthControl {
    let h = v.grid().spacing();
    let d = |i: usize| domain.delta.value(i);
    let lo = (BAND_SPACINGS * h).ln();
    let hi = samples.iter().map(|&i| d(i)).fold(0.0f64, f64::max).ln();
    let mut bins = [(f64::INFINITY, f64::NEG_INFINITY); GROWTH_BINS];
    for &i in samples {
        let t = ((d(i).ln() - lo) / (hi - lo) * GROWTH_BINS as f64).floor();
        let b = (t.max(0.0) as usize).min(GROWTH_BINS - 1);
        bins[b].0 = bins[b].0.min(v.value(i));
        bins[b].1 = bins[b].1.max(v.value(i));
    }
    let mut x = Vec::new();
    let (mut ymin, mut ymax) = (Vec::new(), Vec::new());
    for (b, (mn, mx)) in bins.iter().enumerate() {
        if mn.is_finite() && *mn > 0.0 {
            x.push(lo + (b as f64 + 0.5) * (hi - lo) / GROWTH_BINS as f64);
            ymin.push(mn.ln());
            ymax.push(mx.ln());
        }
    }
    let lower_exponent = fit_line(&x, &ymin).map(|f| f.slope);
    let upper_exponent = fit_line(&x, &ymax).map(|f| f.slope);
    let alpha = upper_exponent.unwrap_or(0.0).clamp(0.0, 1.0);
    let mut lower_c: f64 = 0.0;
    let mut upper_c: f64 = 0.0;
    for &i in samples {
        lower_c = lower_c.max(d(i).powf(n0) * inf_far / v.value(i));
        upper_c = upper_c.max(v.value(i) / (d(i).powf(alpha) * sup_b1));
    }
    GrowthControl {
        lower_exponent,
        upper_exponent,
        lower_c,
        upper_c,
        samples: samples.len(),
    }
}

/// Boundary Harnack constants on one domain for positive `u`, `v` vanishing on `∂Ω ∩ B₃`.
pub fn single_domain_report(
    u: &ScalarField,
    v: &ScalarField,
    domain: &DomainView,
    cfg: &SingleDomainConfig,
) -> Result<SingleDomainReport> {
    domain.check_grid(u)?;
    domain.check_grid(v)?;
    let g = u.grid();
    let h = g.spacing();
    let b1 = Ball::centered(1.0)?;
    let b2 = Ball::centered(2.0)?;
    let b3 = Ball::centered(3.0)?;
    let quarter = Ball::centered(0.25)?;
    for f in [u, v] {
        if let Some(msg) = domain.positivity_violation(f, &b3) {
            return Err(Error::Precondition(msg));
        }
    }
    let far = domain.far_nodes(&b2, cfg.r);
    if far.is_empty() {
        return Err(Error::CorkscrewFailure(format!(
            "no domain node of B₂ with δ ≥ {}",
            cfg.r
        )));
    }
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    let mut inf_far_u = f64::INFINITY;
    let mut inf_far_v = f64::INFINITY;
    for &i in &far {
        let (a, b) = (u.value(i), v.value(i));
        c1 = c1.min(a.min(b));
        c2 = c2.max(a.max(b));
        inf_far_u = inf_far_u.min(a);
        inf_far_v = inf_far_v.min(b);
    }
    if c1 <= 0.0 {
        return Err(Error::Precondition("u or v vanishes on the far set".into()));
    }
    let band = BAND_SPACINGS * h * (1.0 - 1e-9);
    let mut samples = Vec::new();
    g.for_each_node_in_ball(&quarter, |i, _| {
        if domain.nodes[i] && domain.delta.value(i) >= band && u.value(i) > 0.0 && v.value(i) > 0.0 {
            samples.push(i);
        }
    });
    if samples.is_empty() {
        return Err(Error::EmptyIntersection("no domain node of B_{1/4} at depth 2h".into()));
    }
    let q = |i: usize| v.value(i) / u.value(i);
    let ratio_min = samples.iter().map(|&i| q(i)).fold(f64::INFINITY, f64::min);
    let ratio_max = samples.iter().map(|&i| q(i)).fold(f64::NEG_INFINITY, f64::max);
    let k = c2 / c1;
    let m_emp = 1f64.max((ratio_max / k).sqrt()).max((1.0 / (k * ratio_min)).sqrt());
    let sup_v_b1 = domain.sup_in(v, &b1, f64::abs).unwrap_or(0.0);
    let m_growth = ratio_max * inf_far_u / sup_v_b1;
    let growth = growth_control(v, domain, &samples, inf_far_v, sup_v_b1, cfg.n0);
    let (_, chunks) = deep_chunks(&domain.nodes, &domain.delta, cfg.r, &b2);
    let rep_max = chunks
        .iter()
        .map(|c| q(c.representative_node))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SingleDomainReport {
        r: cfg.r,
        far_nodes: far.len(),
        c1,
        c2,
        c2_over_c1: k,
        ratio_min,
        ratio_max,
        m_emp,
        m_growth,
        growth,
        chunks: chunks.len(),
        chunk_bound_c: ratio_max / rep_max,
    })
}
