use rayon::prelude::*;

use super::zero_set::{extract_zero_set_full, ZeroSet};
use crate::error::{Error, Result};
use crate::field::{Ball, GridSpec, Point, ScalarField};

/// Node values of `δ(x) = dist(x, Z)`. Nodes outside the region it was
/// computed for hold `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    grid: GridSpec,
    delta: Vec<f64>,
}

impl DistanceField {
    /// Exact point-to-facet distances at every node (inside `region` if given).
    pub fn from_zero_set(grid: &GridSpec, zero_set: &ZeroSet, region: Option<&Ball>) -> Result<Self> {
        if zero_set.is_empty() {
            return Err(Error::EmptyZeroSet);
        }
        let delta = (0..grid.node_count())
            .into_par_iter()
            .with_min_len(256)
            .map(|i| {
                let p = grid.node_point(i);
                match region {
                    Some(b) if !b.contains(&p) => f64::INFINITY,
                    _ => zero_set.distance(&p),
                }
            })
            .collect();
        Ok(DistanceField {
            grid: grid.clone(),
            delta,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.delta
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.delta[idx]
    }

    /// Pointwise minimum with a second distance, e.g. to box walls that bound a domain.
    pub fn min_with<F: Fn(&Point) -> f64 + Sync>(&self, other: F) -> DistanceField {
        let delta = self
            .delta
            .par_iter()
            .enumerate()
            .map(|(i, d)| d.min(other(&self.grid.node_point(i)).max(0.0)))
            .collect();
        DistanceField {
            grid: self.grid.clone(),
            delta,
        }
    }
}

/// `δ_w` at all nodes from the zero set of `field` over the whole grid.
pub fn distance_to_zero(field: &ScalarField) -> Result<DistanceField> {
    let zs = match extract_zero_set_full(field) {
        Ok(z) => z,
        Err(Error::DegenerateField(_)) => return Err(Error::EmptyZeroSet),
        Err(e) => return Err(e),
    };
    DistanceField::from_zero_set(field.grid(), &zs, None)
}
