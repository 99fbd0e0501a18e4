use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Ball, ScalarField};
use crate::nodal::extract_zero_set;
use crate::util::{fit_line, quantile_sorted};

/// Default lower bound asserted on the upper-envelope exponent.
pub const DEFAULT_ALPHA0: f64 = 0.5;
const FIT_TOLERANCE: f64 = 0.05;
const BINS: usize = 12;
const MIN_PER_BIN: usize = 5;
const MIN_SAMPLES: usize = 100;

/// Power-law envelopes `A₂ δ^{N} ≤ |w|/sup_{B₈}|w| ≤ A₁ δ^{α}`.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub n0: f64,
    pub alpha0: f64,
    pub samples: usize,
    /// Exponent of the lower (1% quantile) envelope.
    pub lower_exponent: f64,
    /// Exponent `α` of the upper (99% quantile) envelope.
    pub upper_exponent: f64,
    pub a1: f64,
    pub a2: f64,
    pub lower_r_squared: f64,
    pub upper_r_squared: f64,
    /// `sup|w|` over nodes of `B₈(center)` inside the box, used to normalize.
    pub normalization: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// [`growth_envelope_with`] using [`DEFAULT_ALPHA0`].
pub fn growth_envelope(field: &ScalarField, region: &Ball, n0: f64) -> Result<GrowthFit> {
    growth_envelope_with(field, region, n0, DEFAULT_ALPHA0)
}

/// Fits `log|w|` against `log δ` over nodes of `region` with `δ ∈ [4h, 1]`:
/// nodes are binned in `log δ`, the 1% and 99% quantiles of `log|w|` per bin
/// give the lower and upper envelopes, and each is fitted by least squares.
pub fn growth_envelope_with(field: &ScalarField, region: &Ball, n0: f64, alpha0: f64) -> Result<GrowthFit> {
    let g = field.grid();
    let h = g.spacing();
    let zs = extract_zero_set(
        field,
        &Ball {
            center: region.center,
            radius: region.radius + 1.0,
        },
    )
    .map_err(|e| match e {
        Error::DegenerateField(_) => Error::EmptyZeroSet,
        e => e,
    })?;
    let mut norm = 0.0f64;
    g.for_each_node_in_ball(
        &Ball {
            center: region.center,
            radius: 8.0,
        },
        |i, _| norm = norm.max(field.value(i).abs()),
    );
    let lo = (4.0 * h).ln();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    g.for_each_node_in_ball(region, |i, p| {
        let w = field.value(i).abs();
        if w == 0.0 {
            return;
        }
        let d = zs.distance(p);
        if d >= 4.0 * h && d <= 1.0 {
            pts.push((d.ln(), (w / norm).ln()));
        }
    });
    if pts.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            found: pts.len(),
            required: MIN_SAMPLES,
        });
    }
    let width = -lo / BINS as f64;
    let mut bins: Vec<Vec<(f64, f64)>> = vec![Vec::new(); BINS];
    for &(ld, lw) in &pts {
        let b = (((ld - lo) / width) as usize).min(BINS - 1);
        bins[b].push((ld, lw));
    }
    let (mut xs, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for bin in bins.iter().filter(|b| b.len() >= MIN_PER_BIN) {
        let mut w: Vec<f64> = bin.iter().map(|p| p.1).collect();
        w.sort_by(f64::total_cmp);
        xs.push(bin.iter().map(|p| p.0).sum::<f64>() / bin.len() as f64);
        lower.push(quantile_sorted(&w, 0.01));
        upper.push(quantile_sorted(&w, 0.99));
    }
    let lf = fit_line(&xs, &lower).ok_or(Error::TooFewSamples {
        found: xs.len(),
        required: 3,
    })?;
    let uf = fit_line(&xs, &upper).ok_or(Error::TooFewSamples {
        found: xs.len(),
        required: 3,
    })?;
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            found: xs.len(),
            required: 3,
        });
    }
    Ok(GrowthFit {
        n0,
        alpha0,
        samples: pts.len(),
        lower_exponent: lf.slope,
        upper_exponent: uf.slope,
        a1: uf.intercept.exp(),
        a2: lf.intercept.exp(),
        lower_r_squared: lf.r_squared,
        upper_r_squared: uf.r_squared,
        normalization: norm,
        lower_ok: lf.slope <= n0 + FIT_TOLERANCE,
        upper_ok: uf.slope >= alpha0,
    })
}
