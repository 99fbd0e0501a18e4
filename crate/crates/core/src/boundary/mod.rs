//! The ratio `v/u` of solutions sharing (part of) a nodal set: local
//! boundedness, two-sided bounds, strong maximum principle, oscillation decay,
//! frequency transfer, Liouville probe, and the single-domain estimates
//! (Carleson, iteration decay, boundary Harnack, growth control, chunk bound).

mod interior;
mod single;
mod transfer;

#[cfg(test)]
mod tests;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{add_scaled, sphere, Ball, GridSpec, Point, ScalarField};
use crate::nodal::{extract_zero_set_full, DistanceField, ZeroSet, ZERO_THRESHOLD};

pub use interior::{
    boundedness_report, holder_probe, strong_max_check, BoundednessConfig, BoundednessReport, ConstructionCheck,
    OscillationProfile, StrongMaxReport,
};
pub use single::{
    carleson_check, iteration_decay_probe, single_domain_report, CarlesonReport, DomainView, GrowthControl,
    IterationDecayReport, SingleDomainConfig, SingleDomainReport,
};
pub use transfer::{
    frequency_transfer_batch, frequency_transfer_check, liouville_probe, LiouvilleReport, LiouvilleVerdict,
    LiouvilleWindow, TransferBatch, TransferConfig, TransferReport,
};

/// Width of the undefined band around `Z(u)`, in grid spacings.
pub const BAND_SPACINGS: f64 = 2.0;
/// Facet distance, in grid spacings, within which one zero set counts as containing another.
pub const INCLUSION_SPACINGS: f64 = 2.0;

/// `v/u` at nodes at distance at least `2h` from `Z(u)`.
#[derive(Clone, Debug)]
pub struct RatioField {
    values: Vec<f64>,
    mask: Vec<bool>,
    delta_u: DistanceField,
    /// A facet of `Z(u)` far from `Z(v)`, if any: the ratio then blows up as `h → 0`.
    pub divergence_witness: Option<Point>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioExtremes {
    pub sup: f64,
    pub inf: f64,
    pub sup_abs: f64,
    pub inf_abs: f64,
    pub argmax: Point,
    pub argmin: Point,
    pub count: usize,
}

impl RatioExtremes {
    pub fn osc(&self) -> f64 {
        self.sup - self.inf
    }
}

impl RatioField {
    pub fn grid(&self) -> &GridSpec {
        self.delta_u.grid()
    }

    /// Node values; `NaN` off the mask.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn value(&self, idx: usize) -> Option<f64> {
        self.mask[idx].then(|| self.values[idx])
    }

    /// `δ_u` at the nodes.
    pub fn delta_u(&self) -> &DistanceField {
        &self.delta_u
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence_witness.is_some()
    }

    /// Multilinear interpolation of the ratio at `p` when every corner of its cell is defined.
    pub fn interpolate(&self, p: &Point) -> Option<f64> {
        let g = self.grid();
        let (cell, frac) = g.locate(p).ok()?;
        // offsets from the first corner keep a constant ratio exact
        let base = self.values[g.index_of(cell)];
        let mut acc = base;
        for k in 0..g.corners_per_cell() {
            let idx = g.index_of(g.corner(cell, k));
            if !self.mask[idx] {
                return None;
            }
            let w: f64 = (0..g.dim())
                .map(|a| if k >> a & 1 == 1 { frac[a] } else { 1.0 - frac[a] })
                .product();
            acc += w * (self.values[idx] - base);
        }
        Some(acc)
    }

    /// Extremes over the defined nodes in `ball` and the sphere samples whose
    /// cell is fully defined; the first sample wins ties (nodes in index
    /// order, then directions in order).
    pub fn extremes_in(&self, ball: &Ball) -> Option<RatioExtremes> {
        let g = self.grid();
        let mut e: Option<RatioExtremes> = None;
        let mut take = |q: f64, p: &Point| match e.as_mut() {
            None => {
                e = Some(RatioExtremes {
                    sup: q,
                    inf: q,
                    sup_abs: q.abs(),
                    inf_abs: q.abs(),
                    argmax: *p,
                    argmin: *p,
                    count: 1,
                })
            }
            Some(e) => {
                if q > e.sup {
                    e.sup = q;
                    e.argmax = *p;
                }
                if q < e.inf {
                    e.inf = q;
                    e.argmin = *p;
                }
                e.sup_abs = e.sup_abs.max(q.abs());
                e.inf_abs = e.inf_abs.min(q.abs());
                e.count += 1;
            }
        };
        g.for_each_node_in_ball(ball, |i, p| {
            if self.mask[i] {
                take(self.values[i], p);
            }
        });
        for d in sphere::default_sup_directions(g.dim()) {
            let p = add_scaled(&ball.center, ball.radius, d);
            if let Some(q) = self.interpolate(&p) {
                take(q, &p);
            }
        }
        e
    }
}

fn band_mask(u: &ScalarField, delta_u: &DistanceField) -> Vec<bool> {
    let h = u.grid().spacing();
    let band = BAND_SPACINGS * h * (1.0 - 1e-9);
    let thr = ZERO_THRESHOLD * u.sup_abs();
    (0..u.grid().node_count())
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| delta_u.value(i) >= band && u.value(i).abs() > thr)
        .collect()
}

/// The quotient `v/u` on nodes with `δ_u ≥ 2h`.
pub fn ratio_field(v: &ScalarField, u: &ScalarField) -> Result<RatioField> {
    if v.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    if u.sup_abs() == 0.0 {
        return Err(Error::DegenerateField(format!(
            "denominator '{}' vanishes identically",
            u.label()
        )));
    }
    let zu = extract_zero_set_full(u)?;
    let delta_u = DistanceField::from_zero_set(u.grid(), &zu, None)?;
    let mask = band_mask(u, &delta_u);
    let values = (0..mask.len())
        .map(|i| if mask[i] { v.value(i) / u.value(i) } else { f64::NAN })
        .collect();
    let divergence_witness = match zero_set_or_none(v)? {
        Some(zv) => inclusion_witness(&zu, &zv, u.grid().spacing(), None),
        None if v.sup_abs() == 0.0 => None,
        None => zu.facets.first().map(|f| f.centroid()),
    };
    Ok(RatioField {
        values,
        mask,
        delta_u,
        divergence_witness,
    })
}

fn zero_set_or_none(f: &ScalarField) -> Result<Option<ZeroSet>> {
    match extract_zero_set_full(f) {
        Ok(z) if z.is_empty() => Ok(None),
        Ok(z) => Ok(Some(z)),
        Err(Error::DegenerateField(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Centroid of the first facet of `a` (restricted to `region`) farther than
/// `2h` from every facet of `b`.
fn inclusion_witness(a: &ZeroSet, b: &ZeroSet, h: f64, region: Option<&Ball>) -> Option<Point> {
    let tol = INCLUSION_SPACINGS * h;
    a.facets
        .par_iter()
        .map(|f| f.centroid())
        .filter(|c| region.is_none_or(|r| r.contains(c)))
        .find_first(|c| b.distance(c) > tol)
}

/// `Z(u) ⊆ Z(v)` within `2h` on the facets of `Z(u)` inside `region`.
pub fn check_inclusion(u: &ScalarField, v: &ScalarField, region: Option<&Ball>) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let Some(zu) = zero_set_or_none(u)? else {
        return Ok(());
    };
    let witness = match zero_set_or_none(v)? {
        Some(zv) => inclusion_witness(&zu, &zv, u.grid().spacing(), region),
        None if v.sup_abs() == 0.0 => None,
        None => zu
            .facets
            .iter()
            .map(|f| f.centroid())
            .find(|c| region.is_none_or(|r| r.contains(c))),
    };
    match witness {
        Some(w) => Err(Error::InclusionViolation { witness: w }),
        None => Ok(()),
    }
}

/// `Z(u) = Z(v)` within `2h` in both directions.
pub fn check_equality(u: &ScalarField, v: &ScalarField, region: Option<&Ball>) -> Result<()> {
    let map = |e: Error| match e {
        Error::InclusionViolation { witness } => Error::NodalSetMismatch { witness },
        e => e,
    };
    check_inclusion(u, v, region).map_err(map)?;
    check_inclusion(v, u, region).map_err(map)
}

/// Empirical constants of the ratio checks; absent entries were not run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BhReport {
    pub c_emp: Option<f64>,
    pub two_sided_c: Option<f64>,
    pub single_domain_m: Option<f64>,
    pub single_domain_r: Option<f64>,
    pub chunk_bound_c: Option<f64>,
    pub growth_control: Option<GrowthControl>,
    pub iteration_decay: Option<IterationDecayReport>,
    pub freq_transfer_d: Option<f64>,
    pub carleson_m: Option<f64>,
    pub carleson_c: Option<f64>,
}
