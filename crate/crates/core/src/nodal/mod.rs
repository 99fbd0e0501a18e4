//! Zero sets, nodal domains, the distance function `δ_w = dist(·, Z(w))`, the
//! singular set and the geometric certificates of nodal domains.

mod distance;
mod domains;
mod geometry;
mod kdtree;
mod singular;
mod zero_set;

pub use distance::{distance_to_zero, DistanceField};
pub use domains::{nodal_domains, DomainPartition, NodalDomain};
pub use geometry::{
    boundary_geometry_report, corkscrew_check, deep_chunks, quantitative_connectedness, AhlforsReport, AhlforsSample,
    Chunk, CorkscrewReport, GeometryConfig, GeometryReport, QcVerdict,
};
pub use kdtree::FacetIndex;
pub use singular::{singular_set, SingularSet};
pub use zero_set::{extract_zero_set, extract_zero_set_full, Facet, ZeroSet};

use crate::field::ScalarField;

/// Relative threshold below which a node value counts as an exact zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Total sign function on nodes: `sign(w)` where `|w| > 1e-12·sup|w|`; exact
/// zeros take the sign of their largest-magnitude face neighbor (first in the
/// order −x, +x, −y, +y, −z, +z on ties), or +1 if all neighbors vanish too.
pub fn total_signs(field: &ScalarField) -> Vec<i8> {
    use rayon::prelude::*;
    let g = field.grid();
    let thr = ZERO_THRESHOLD * field.sup_abs();
    let v = field.values();
    (0..g.node_count())
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            if v[i] > thr {
                return 1;
            }
            if v[i] < -thr {
                return -1;
            }
            let mut best = 0.0;
            let mut sign = 1;
            for (_, n) in g.face_neighbors(g.coords(i)) {
                let w = v[g.index_of(n)];
                if w.abs() > best {
                    best = w.abs();
                    sign = if w > 0.0 { 1 } else { -1 };
                }
            }
            if best > thr {
                sign
            } else {
                1
            }
        })
        .collect()
}
