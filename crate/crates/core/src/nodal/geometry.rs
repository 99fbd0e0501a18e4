use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::distance::DistanceField;
use super::domains::DomainPartition;
use super::singular::{singular_set, SingularSet};
use crate::error::{Error, Result};
use crate::field::{dist, Ball, Point, ScalarField};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CorkscrewReport {
    pub inradius: f64,
    pub witness: Point,
}

/// Largest `min(δ(x), dist(x, ∂ball))` over domain nodes `x` in `ball`.
pub fn corkscrew_check(
    partition: &DomainPartition,
    field: &ScalarField,
    id: usize,
    delta: &DistanceField,
    ball: &Ball,
) -> Result<CorkscrewReport> {
    let g = field.grid();
    let mask = partition.node_mask(field, id);
    let mut best: Option<CorkscrewReport> = None;
    g.for_each_node_in_ball(ball, |i, p| {
        if !mask[i] {
            return;
        }
        let r = delta.value(i).min(ball.radius - dist(p, &ball.center));
        if best.is_none_or(|b| r > b.inradius) {
            best = Some(CorkscrewReport {
                inradius: r,
                witness: *p,
            });
        }
    });
    best.ok_or_else(|| Error::EmptyIntersection(format!("domain {id} does not meet the ball")))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AhlforsSample {
    pub center: Point,
    pub scale: f64,
    pub measure: f64,
    /// `H^{n−1}(∂Ω ∩ B_s(x)) / s^{n−1}`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AhlforsReport {
    pub samples: Vec<AhlforsSample>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// A face-connected group of cubes of side `r/10` meeting the deep set.
#[derive(Clone, Debug, Serialize)]
pub struct Chunk {
    pub id: usize,
    pub cubes: usize,
    pub deep_nodes: usize,
    /// Chunk centroid snapped to the nearest deep node of the chunk.
    pub representative: Point,
    pub representative_node: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QcVerdict {
    pub center: Point,
    pub scale: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Nodes with `δ ≥ δ₂s`.
    pub deep_points: usize,
    /// Components of the `δ ≥ δ₁s` subgraph that contain a `δ₂s`-deep node.
    pub components: usize,
    pub connected: bool,
}

#[derive(Clone, Debug)]
pub struct GeometryConfig {
    pub ahlfors_centers: usize,
    pub ahlfors_scales: usize,
    pub ahlfors_max_scale: f64,
    /// The `r` of the deep set `{δ ≥ r}`; cubes have side `max(r/10, h)`.
    pub chunk_radius: f64,
    pub chunk_ball: Ball,
    pub qc_deltas: (f64, f64),
    /// `(center, scale)` pairs at which connectedness is tested.
    pub qc_samples: Vec<(Point, f64)>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            ahlfors_centers: 32,
            ahlfors_scales: 5,
            ahlfors_max_scale: 1.0,
            chunk_radius: 0.25,
            chunk_ball: Ball {
                center: [0.0; 3],
                radius: 2.0,
            },
            qc_deltas: (0.05, 0.1),
            qc_samples: vec![([0.0; 3], 1.0)],
        }
    }
}

/// Geometric certificates of one nodal domain.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub domain_id: usize,
    pub sign: i8,
    pub ahlfors: AhlforsReport,
    pub singular: SingularSet,
    pub chunk_radius: f64,
    pub chunk_side: f64,
    pub chunks: Vec<Chunk>,
    pub qc: Vec<QcVerdict>,
    pub quantitatively_connected: bool,
}

impl GeometryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry report serializes")
    }
}

fn ahlfors(partition: &DomainPartition, id: usize, cfg: &GeometryConfig) -> Result<AhlforsReport> {
    let zs = &partition.zero_set;
    let region = &partition.region;
    let smax = cfg.ahlfors_max_scale;
    let eligible: Vec<usize> = partition.domains[id]
        .boundary_facets
        .iter()
        .copied()
        .filter(|&f| dist(&zs.facets[f].centroid(), &region.center) <= region.radius - smax)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoBoundary(format!(
            "domain {id} has no boundary at distance {smax} from the region sphere"
        )));
    }
    let n = cfg.ahlfors_centers.min(eligible.len()).max(1);
    let exp = zs.dim() as i32 - 1;
    let mut samples = Vec::with_capacity(n * cfg.ahlfors_scales);
    for k in 0..n {
        let center = zs.facets[eligible[k * eligible.len() / n]].centroid();
        for j in 0..cfg.ahlfors_scales {
            let scale = smax / f64::from(1u32 << j);
            let measure = partition.boundary_measure_in(id, &Ball { center, radius: scale });
            samples.push(AhlforsSample {
                center,
                scale,
                measure,
                ratio: measure / scale.powi(exp),
            });
        }
    }
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(AhlforsReport {
        samples,
        min_ratio,
        max_ratio,
    })
}

/// Chunks of the deep set `{δ ≥ r} ∩ ball` of the masked nodes, with the cube side used.
pub fn deep_chunks(mask: &[bool], delta: &DistanceField, r: f64, ball: &Ball) -> (f64, Vec<Chunk>) {
    let g = delta.grid();
    let side = (r / 10.0).max(g.spacing());
    let mut cubes: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    g.for_each_node_in_ball(ball, |i, p| {
        if mask[i] && delta.value(i) >= r {
            let key = [0, 1, 2].map(|a| (p[a] / side + 1e-9).floor() as i64);
            cubes.entry(key).or_default().push(i);
        }
    });
    let mut label: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    let mut out = Vec::new();
    let keys: Vec<[i64; 3]> = cubes.keys().copied().collect();
    for start in keys {
        if label.contains_key(&start) {
            continue;
        }
        let id = out.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        label.insert(start, id);
        while let Some(k) = queue.pop_front() {
            members.push(k);
            for a in 0..g.dim() {
                for d in [-1, 1] {
                    let mut n = k;
                    n[a] += d;
                    if cubes.contains_key(&n) && !label.contains_key(&n) {
                        label.insert(n, id);
                        queue.push_back(n);
                    }
                }
            }
        }
        let mut centroid = [0.0; 3];
        for k in &members {
            for a in 0..3 {
                centroid[a] += (k[a] as f64 + 0.5) * side;
            }
        }
        for c in centroid.iter_mut().take(g.dim()) {
            *c /= members.len() as f64;
        }
        for c in centroid.iter_mut().skip(g.dim()) {
            *c = 0.0;
        }
        let mut nodes: Vec<usize> = members.iter().flat_map(|k| cubes[k].iter().copied()).collect();
        nodes.sort_unstable();
        let rep = nodes
            .iter()
            .copied()
            .min_by(|&a, &b| dist(&g.node_point(a), &centroid).total_cmp(&dist(&g.node_point(b), &centroid)))
            .expect("chunk has a node");
        out.push(Chunk {
            id,
            cubes: members.len(),
            deep_nodes: nodes.len(),
            representative: g.node_point(rep),
            representative_node: rep,
        });
    }
    (side, out)
}

/// Whether all `δ₂s`-deep domain nodes of `B_s(center)` connect through the
/// `δ₁s`-deep domain nodes of the same ball (face-neighbor graph search).
pub fn quantitative_connectedness(
    mask: &[bool],
    delta: &DistanceField,
    center: &Point,
    scale: f64,
    delta1: f64,
    delta2: f64,
) -> Result<QcVerdict> {
    if !(scale > 0.0) || !(delta1 > 0.0) || delta1 > delta2 {
        return Err(Error::Precondition(format!(
            "need s > 0 and 0 < δ₁ ≤ δ₂, got s={scale}, δ₁={delta1}, δ₂={delta2}"
        )));
    }
    let g = delta.grid();
    let ball = Ball {
        center: *center,
        radius: scale,
    };
    let t1 = delta1 * scale;
    let t2 = delta2 * scale;
    let inside: BTreeSet<usize> = g
        .nodes_in_ball(&ball)
        .into_iter()
        .filter(|&i| mask[i] && delta.value(i) >= t1)
        .collect();
    let deep: Vec<usize> = inside.iter().copied().filter(|&i| delta.value(i) >= t2).collect();
    let mut comp: BTreeMap<usize, usize> = BTreeMap::new();
    let mut components = 0;
    for &s in &deep {
        if comp.contains_key(&s) {
            continue;
        }
        comp.insert(s, components);
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for (_, n) in g.face_neighbors(g.coords(i)) {
                let j = g.index_of(n);
                if inside.contains(&j) && !comp.contains_key(&j) {
                    comp.insert(j, components);
                    queue.push_back(j);
                }
            }
        }
        components += 1;
    }
    Ok(QcVerdict {
        center: *center,
        scale,
        delta1,
        delta2,
        deep_points: deep.len(),
        components,
        connected: components <= 1,
    })
}

/// Ahlfors ratios, singular-set proxy, chunk decomposition and
/// quantitative-connectedness verdicts for domain `id`. `delta` is the
/// distance to the domain boundary (nonpositive outside the domain).
pub fn boundary_geometry_report(
    field: &ScalarField,
    partition: &DomainPartition,
    id: usize,
    delta: &DistanceField,
    cfg: &GeometryConfig,
) -> Result<GeometryReport> {
    if id >= partition.domains.len() {
        return Err(Error::Precondition(format!("no domain with id {id}")));
    }
    if delta.grid() != field.grid() {
        return Err(Error::GridMismatch);
    }
    let ahlfors = ahlfors(partition, id, cfg)?;
    let singular = singular_set(field, &partition.zero_set, &partition.region)?;
    let mask = partition.node_mask(field, id);
    let (chunk_side, chunks) = deep_chunks(&mask, delta, cfg.chunk_radius, &cfg.chunk_ball);
    let (d1, d2) = cfg.qc_deltas;
    let qc = cfg
        .qc_samples
        .iter()
        .map(|(c, s)| quantitative_connectedness(&mask, delta, c, *s, d1, d2))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometryReport {
        domain_id: id,
        sign: partition.domains[id].sign,
        ahlfors,
        singular,
        chunk_radius: cfg.chunk_radius,
        chunk_side,
        chunks,
        quantitatively_connected: qc.iter().all(|v| v.connected),
        qc,
    })
}
