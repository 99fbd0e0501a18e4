use std::io::Write;

use serde::Serialize;

use super::{check_equality, check_inclusion, ratio_field, BAND_SPACINGS};
use crate::error::{Error, Result};
use crate::field::{dist, Ball, Point, ScalarField};
use crate::nodal::extract_zero_set_full;
use crate::util::fit_line;

#[derive(Clone, Debug)]
pub struct BoundednessConfig {
    pub n0: f64,
    /// Corkscrew constant used by the `Cu − v` construction diagnostic.
    pub c4: f64,
}

impl Default for BoundednessConfig {
    fn default() -> Self {
        BoundednessConfig { n0: 2.0, c4: 0.25 }
    }
}

/// `C = 2·max(c⁻¹, 2^{N₀+1})` with `c = min |u|` over `{x ∈ B₃ : δ_u(x) > c₄/8}`
/// (both fields normalized on `B₈`), and whether `Cu − v` has the sign of `u`
/// on every defined node of `B₁`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstructionCheck {
    pub c: f64,
    pub big_c: f64,
    pub checked_nodes: usize,
    pub same_signs: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundednessReport {
    pub sup_ratio_b1: f64,
    pub sup_v_b8: f64,
    pub sup_u_b8: f64,
    /// `sup_{B₁}|v/u| ÷ (sup_{B₈}|v| / sup_{B₈}|u|)`.
    pub c_emp: f64,
    /// `sup_{B₁}|v/u| / inf_{B₁}|v/u|` when `Z(u) = Z(v)` on `B₁`.
    pub two_sided_c: Option<f64>,
    pub construction: ConstructionCheck,
    pub defined_nodes: usize,
}

/// Local boundedness of `v/u` on `B₁` given `Z(u) ⊆ Z(v)`.
pub fn boundedness_report(v: &ScalarField, u: &ScalarField, cfg: &BoundednessConfig) -> Result<BoundednessReport> {
    check_inclusion(u, v, None)?;
    let b1 = Ball::centered(1.0)?;
    let b8 = Ball::centered(8.0)?;
    let ratio = ratio_field(v, u)?;
    let ext = ratio
        .extremes_in(&b1)
        .ok_or_else(|| Error::EmptyIntersection("no defined ratio node in B₁".into()))?;
    let sup_v_b8 = v.sup_norm_on_ball(&b8)?;
    let sup_u_b8 = u.sup_norm_on_ball(&b8)?;
    let c_emp = ext.sup_abs / (sup_v_b8 / sup_u_b8);
    let two_sided_c = check_equality(u, v, Some(&b1))
        .is_ok()
        .then(|| ext.sup_abs / ext.inf_abs);

    let g = u.grid();
    let b3 = Ball::centered(3.0)?;
    let mut c = f64::INFINITY;
    g.for_each_node_in_ball(&b3, |i, _| {
        if ratio.delta_u().value(i) > cfg.c4 / 8.0 {
            c = c.min(u.value(i).abs() / sup_u_b8);
        }
    });
    if !c.is_finite() || c == 0.0 {
        return Err(Error::CorkscrewFailure(format!(
            "no node of B₃ with δ_u > {}",
            cfg.c4 / 8.0
        )));
    }
    let big_c = 2.0 * (1.0 / c).max(2f64.powf(cfg.n0 + 1.0));
    let mut checked_nodes = 0;
    let mut same_signs = true;
    g.for_each_node_in_ball(&b1, |i, _| {
        if ratio.mask()[i] {
            let un = u.value(i) / sup_u_b8;
            let w = big_c * un - v.value(i) / sup_v_b8;
            checked_nodes += 1;
            same_signs &= w * un > 0.0;
        }
    });
    Ok(BoundednessReport {
        sup_ratio_b1: ext.sup_abs,
        sup_v_b8,
        sup_u_b8,
        c_emp,
        two_sided_c,
        construction: ConstructionCheck {
            c,
            big_c,
            checked_nodes,
            same_signs,
        },
        defined_nodes: ext.count,
    })
}

/// Oscillation below which the ratio counts as constant.
pub const CONSTANT_RATIO_OSC: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StrongMaxReport {
    pub sup_location: Point,
    pub sup_value: f64,
    /// Distance from the maximizer to the sphere of the ball.
    pub interior_gap: f64,
    /// The ratio is constant on the ball; the check is vacuous.
    pub constant_ratio: bool,
    /// `interior_gap ≤ 2h`.
    pub max_on_boundary: bool,
}

/// Where `v/u` attains its maximum over the defined nodes of `ball`.
pub fn strong_max_check(v: &ScalarField, u: &ScalarField, ball: &Ball) -> Result<StrongMaxReport> {
    check_inclusion(u, v, None)?;
    let ratio = ratio_field(v, u)?;
    let ext = ratio
        .extremes_in(ball)
        .ok_or_else(|| Error::EmptyIntersection("no defined ratio node in the ball".into()))?;
    let gap = ball.radius - dist(&ext.argmax, &ball.center);
    let constant_ratio = ext.osc() <= CONSTANT_RATIO_OSC;
    Ok(StrongMaxReport {
        sup_location: ext.argmax,
        sup_value: ext.sup,
        interior_gap: gap,
        constant_ratio,
        max_on_boundary: !constant_ratio && gap <= BAND_SPACINGS * u.grid().spacing(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationProfile {
    pub center: Point,
    /// Radii in decreasing order.
    pub scales: Vec<f64>,
    /// `sup − inf` of `v/u` on the defined nodes of `B_{r_k}`.
    pub osc: Vec<f64>,
    /// `osc_{k+1} / osc_k` (0 where `osc_k = 0`).
    pub decay_factors: Vec<f64>,
    /// Slope of `log osc` against `log r` over the scales with `osc > 0`.
    pub alpha_fit: Option<f64>,
    /// `osc(r/100) / osc(r)` implied by the fit: `100^{−α}`.
    pub decay_at_100: Option<f64>,
}

impl OscillationProfile {
    /// Decay over a scale ratio of 100 at most `1 − η` (vacuous for a constant ratio).
    pub fn decays(&self, eta: f64) -> bool {
        match self.decay_at_100 {
            Some(d) => d <= 1.0 - eta,
            None => self.osc.iter().all(|o| *o <= CONSTANT_RATIO_OSC),
        }
    }

    /// CSV rows `scale,osc`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["scale", "osc"]).map_err(io)?;
        for (s, o) in self.scales.iter().zip(&self.osc) {
            out.write_record([s.to_string(), o.to_string()]).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Oscillation of `v/u` on shrinking balls about a point of `Z(u)`.
pub fn holder_probe(v: &ScalarField, u: &ScalarField, center: &Point, scales: &[f64]) -> Result<OscillationProfile> {
    check_inclusion(u, v, None)?;
    let g = u.grid();
    let zu = extract_zero_set_full(u)?;
    let d = zu.distance(center);
    if d > BAND_SPACINGS * g.spacing() {
        return Err(Error::Precondition(format!("center {center:?} is {d} away from Z(u)")));
    }
    let ratio = ratio_field(v, u)?;
    let mut sorted: Vec<f64> = scales.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let mut used = Vec::new();
    let mut osc = Vec::new();
    for r in sorted {
        let ball = Ball::new(*center, r)?;
        if !g.contains_ball(&ball) {
            continue;
        }
        if let Some(e) = ratio.extremes_in(&ball) {
            used.push(r);
            osc.push(e.osc());
        }
    }
    if used.len() < 3 {
        return Err(Error::TooFewSamples {
            found: used.len(),
            required: 3,
        });
    }
    let decay_factors = osc
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = used
        .iter()
        .zip(&osc)
        .filter(|(_, o)| **o > CONSTANT_RATIO_OSC)
        .map(|(r, o)| (r.ln(), o.ln()))
        .unzip();
    let alpha_fit = fit_line(&lx, &ly).map(|f| f.slope);
    Ok(OscillationProfile {
        center: *center,
        scales: used,
        osc,
        decay_factors,
        alpha_fit,
        decay_at_100: alpha_fit.map(|a| 100f64.powf(-a)),
    })
}
