//! Harmonic measure of `∂(Ω ∩ B₅)` for one nodal domain and its comparison with
//! `|∇u₀| dH^{n-1}` on `∂Ω ∩ B₁`.
//!
//! Patch data are mollified indicators: at a boundary point `q`, the share of
//! zero-set facet measure within `2h` of `q` that belongs to the patch. Points
//! away from every patch (the clip sphere, the zero set outside `B₁`) carry
//! the remaining "rest" mass. Weights come from one adjoint solve per pole,
//! which gives the same numbers as one Dirichlet solve per patch.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dist, Ball, CoefficientField, Point, ScalarField};
use crate::nodal::{total_signs, DomainPartition, ZeroSet};
use crate::solver::{BoundaryData, DirichletProblem, MaskedRegion, Region, System};
use crate::util::ordered_sum;

/// Mollification radius of patch indicators, in grid spacings.
pub const MOLLIFY_SPACINGS: f64 = 2.0;

/// Radius of the clipped domain `Ω ∩ B₅`.
pub const CLIP_RADIUS: f64 = 5.0;

/// Default adjoint solve tolerance.
pub const MEASURE_TOL: f64 = 1e-9;

/// Minimum fraction of `∂Ω ∩ B₁` a partition must cover.
pub const MIN_COVERAGE: f64 = 0.99;

/// One nodal domain clipped to a ball, with its assembled Dirichlet system.
pub struct MeasureDomain {
    field: ScalarField,
    sign: i8,
    clip: Ball,
    zero_set: ZeroSet,
    boundary_facets: Vec<usize>,
    system: System,
    chunk_radius: f64,
    tolerance: f64,
}

impl MeasureDomain {
    /// Domain `id` of `partition` clipped to `B₅(0)`.
    pub fn new(u0: &ScalarField, operator: &CoefficientField, partition: &DomainPartition, id: usize) -> Result<Self> {
        let clip = Ball::new(partition.region.center, CLIP_RADIUS)?;
        Self::clipped(u0, operator, partition, id, clip)
    }

    pub fn clipped(
        u0: &ScalarField,
        operator: &CoefficientField,
        partition: &DomainPartition,
        id: usize,
        clip: Ball,
    ) -> Result<Self> {
        if u0.grid() != operator.grid() {
            return Err(Error::GridMismatch);
        }
        let dom = partition
            .domains
            .get(id)
            .ok_or_else(|| Error::Precondition(format!("no domain with id {id}")))?;
        let r = &partition.region;
        if dist(&r.center, &clip.center) + clip.radius > r.radius + 1e-12 {
            return Err(Error::Precondition(format!(
                "partition region (radius {}) does not cover the clip ball (radius {})",
                r.radius, clip.radius
            )));
        }
        let signs = total_signs(u0);
        let mask = partition.node_mask(u0, id);
        let s = dom.sign;
        let interior: Vec<bool> = mask.iter().zip(&signs).map(|(&m, &t)| m && t == s).collect();
        let level = u0.scaled(s as f64);
        let problem = DirichletProblem {
            operator: operator.clone(),
            region: Region::Masked(MaskedRegion {
                interior,
                level: Some(level),
                clip: Some(clip),
            }),
            boundary: BoundaryData::function(|_| 0.0),
        };
        let system = System::assemble(&problem)?;
        Ok(MeasureDomain {
            field: u0.clone(),
            sign: s,
            clip,
            zero_set: partition.zero_set.clone(),
            boundary_facets: dom.boundary_facets.clone(),
            system,
            chunk_radius: 0.25,
            tolerance: MEASURE_TOL,
        })
    }

    /// Chunk radius `r`; poles need `δ ≥ r/2`.
    pub fn with_chunk_radius(mut self, r: f64) -> Self {
        self.chunk_radius = r;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn chunk_radius(&self) -> f64 {
        self.chunk_radius
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn clip(&self) -> &Ball {
        &self.clip
    }

    pub fn zero_set(&self) -> &ZeroSet {
        &self.zero_set
    }

    pub fn boundary_facets(&self) -> &[usize] {
        &self.boundary_facets
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    /// Distance from `p` to the zero set.
    pub fn delta(&self, p: &Point) -> f64 {
        self.zero_set.distance(p)
    }

    /// Unknown rows and multilinear weights of the cell containing `p`, or
    /// `None` if a corner is not an unknown of the system.
    fn pole_stencil(&self, p: &Point) -> Option<Vec<(usize, f64)>> {
        let g = self.system.grid();
        let (cell, frac) = g.locate(p).ok()?;
        let mut out = Vec::new();
        for k in 0..g.corners_per_cell() {
            let mut w = 1.0;
            for (a, f) in frac.iter().enumerate().take(g.dim()) {
                w *= if (k >> a) & 1 == 1 { *f } else { 1.0 - f };
            }
            let row = self.system.unknown_index(g.index_of(g.corner(cell, k)))?;
            if w != 0.0 {
                out.push((row, w));
            }
        }
        Some(out)
    }

    fn check_pole(&self, pole: &Point) -> Result<Vec<(usize, f64)>> {
        let delta = self.delta(pole);
        let required = self.chunk_radius / 2.0;
        let placement = Error::PolePlacement {
            pole: *pole,
            delta,
            required,
        };
        if delta < required {
            return Err(placement);
        }
        self.pole_stencil(pole).ok_or(placement)
    }

    /// Adjoint solution `M z = e_pole`: the discrete harmonic measure density
    /// against the boundary links.
    fn adjoint(&self, stencil: &[(usize, f64)]) -> Result<(Vec<f64>, usize, f64)> {
        let mut b = vec![0.0; self.system.unknown_count()];
        for &(row, w) in stencil {
            b[row] += w;
        }
        self.system.solve(&b, self.tolerance, 0.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Patch {
    pub id: usize,
    /// Facet indices into the domain's zero set.
    pub facets: Vec<usize>,
    /// Measure-weighted facet centroid.
    pub center: Point,
    /// `H^{n-1}` measure.
    pub size: f64,
}

/// Disjoint groups of boundary facets of `∂Ω ∩ B₁`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryPartition {
    pub patches: Vec<Patch>,
    pub coverage: f64,
    pub ball: Ball,
    #[serde(skip)]
    owner: Vec<Option<usize>>,
}

impl BoundaryPartition {
    /// Domain boundary facets with centroid in `ball`, binned into cubes of
    /// side `side` aligned at the lower corner of the ball.
    pub fn cubes(domain: &MeasureDomain, ball: &Ball, side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return Err(Error::Precondition(format!("patch side {side} must be positive")));
        }
        let dim = domain.field.grid().dim();
        let mut bins: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        for &f in &domain.boundary_facets {
            let c = domain.zero_set.facets[f].centroid();
            if !ball.contains(&c) {
                continue;
            }
            let mut key = [0i64; 3];
            for a in 0..dim {
                key[a] = ((c[a] - ball.center[a] + ball.radius) / side).floor() as i64;
            }
            bins.entry(key).or_default().push(f);
        }
        Self::from_groups(domain, ball, bins.into_values().collect())
    }

    /// Partition from explicit facet groups.
    pub fn from_groups(domain: &MeasureDomain, ball: &Ball, groups: Vec<Vec<usize>>) -> Result<Self> {
        let facets = &domain.zero_set.facets;
        let mut owner = vec![None; facets.len()];
        let mut patches = Vec::with_capacity(groups.len());
        for (id, group) in groups.into_iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Precondition(format!("patch {id} is empty")));
            }
            let mut size = 0.0;
            let mut center = [0.0; 3];
            for &f in &group {
                let slot = owner
                    .get_mut(f)
                    .ok_or_else(|| Error::Precondition(format!("facet {f} out of range")))?;
                if slot.is_some() {
                    return Err(Error::Precondition(format!("facet {f} belongs to two patches")));
                }
                *slot = Some(id);
                let m = facets[f].measure();
                let c = facets[f].centroid();
                size += m;
                for a in 0..3 {
                    center[a] += m * c[a];
                }
            }
            if size > 0.0 {
                center.iter_mut().for_each(|c| *c /= size);
            }
            patches.push(Patch {
                id,
                facets: group,
                center,
                size,
            });
        }
        let total: f64 = domain
            .boundary_facets
            .iter()
            .map(|&f| facets[f].clipped_measure(ball))
            .sum();
        let covered: f64 = patches
            .iter()
            .flat_map(|p| p.facets.iter())
            .map(|&f| facets[f].clipped_measure(ball))
            .sum();
        if total == 0.0 {
            return Err(Error::NoBoundary(format!(
                "domain boundary does not meet the ball of radius {}",
                ball.radius
            )));
        }
        let coverage = covered / total;
        if coverage < MIN_COVERAGE {
            return Err(Error::InsufficientCoverage(format!(
                "patches cover {coverage:.4} of the boundary in the ball"
            )));
        }
        Ok(BoundaryPartition {
            patches,
            coverage,
            ball: *ball,
            owner,
        })
    }

    /// Union of the given patches as a single patch; other patches dropped
    /// (no coverage requirement).
    pub fn merged(&self, domain: &MeasureDomain, ids: &[usize]) -> Result<Self> {
        let mut group = Vec::new();
        for &i in ids {
            let p = self
                .patches
                .get(i)
                .ok_or_else(|| Error::Precondition(format!("no patch {i}")))?;
            group.extend_from_slice(&p.facets);
        }
        Ok(Self::partial(domain, &self.ball, &group))
    }

    /// Partition without the coverage requirement (sub-collections of patches).
    fn partial(domain: &MeasureDomain, ball: &Ball, group: &[usize]) -> Self {
        let facets = &domain.zero_set.facets;
        let mut owner = vec![None; facets.len()];
        let mut size = 0.0;
        let mut center = [0.0; 3];
        for &f in group {
            owner[f] = Some(0);
            let m = facets[f].measure();
            let c = facets[f].centroid();
            size += m;
            for a in 0..3 {
                center[a] += m * c[a];
            }
        }
        if size > 0.0 {
            center.iter_mut().for_each(|c| *c /= size);
        }
        let total: f64 = domain
            .boundary_facets
            .iter()
            .map(|&f| facets[f].clipped_measure(ball))
            .sum();
        let covered: f64 = group.iter().map(|&f| facets[f].clipped_measure(ball)).sum();
        BoundaryPartition {
            patches: vec![Patch {
                id: 0,
                facets: group.to_vec(),
                center,
                size,
            }],
            coverage: if total > 0.0 { covered / total } else { 0.0 },
            ball: *ball,
            owner,
        }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Mollified patch indicators at `q`: `(patch, share)` pairs with shares
    /// summing to at most 1.
    pub fn indicator(&self, zero_set: &ZeroSet, q: &Point, radius: f64) -> Vec<(usize, f64)> {
        let near = zero_set.facets_within(q, radius);
        let mut total = 0.0;
        let mut shares: BTreeMap<usize, f64> = BTreeMap::new();
        for f in near {
            let m = zero_set.facets[f].measure();
            total += m;
            if let Some(Some(p)) = self.owner.get(f) {
                *shares.entry(*p).or_default() += m;
            }
        }
        if total == 0.0 {
            return Vec::new();
        }
        shares.into_iter().map(|(p, m)| (p, m / total)).collect()
    }

    /// Mollified indicator of patch `id` at `q`.
    pub fn patch_value(&self, zero_set: &ZeroSet, id: usize, q: &Point, radius: f64) -> f64 {
        self.indicator(zero_set, q, radius)
            .into_iter()
            .find(|(p, _)| *p == id)
            .map_or(0.0, |(_, s)| s)
    }
}

/// Harmonic measure of the patches seen from one pole.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureVector {
    pub pole: Point,
    pub weights: Vec<f64>,
    /// Mass on the boundary outside every patch.
    pub rest: f64,
    /// Mass of all of `∂(Ω ∩ B₅)`.
    pub total: f64,
    pub total_in_b1: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub fn harmonic_measure(domain: &MeasureDomain, pole: &Point, partition: &BoundaryPartition) -> Result<MeasureVector> {
    let stencil = domain.check_pole(pole)?;
    let (z, iterations, residual) = domain.adjoint(&stencil)?;
    Ok(weights_from_adjoint(domain, partition, *pole, &z, iterations, residual))
}

fn weights_from_adjoint(
    domain: &MeasureDomain,
    partition: &BoundaryPartition,
    pole: Point,
    z: &[f64],
    iterations: usize,
    residual: f64,
) -> MeasureVector {
    let radius = MOLLIFY_SPACINGS * domain.system.grid().spacing();
    let links = domain.system.links();
    let mut per_link: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(links.len());
    for l in links {
        let mass = l.weight * z[l.row];
        per_link.push((mass, partition.indicator(&domain.zero_set, &l.point, radius)));
    }
    let total = ordered_sum(per_link.len(), |i| per_link[i].0);
    let mut weights = vec![0.0; partition.len()];
    let mut covered = 0.0;
    for (mass, shares) in &per_link {
        for &(p, s) in shares {
            weights[p] += mass * s;
            covered += mass * s;
        }
    }
    let total_in_b1 = weights.iter().sum();
    MeasureVector {
        pole,
        weights,
        rest: total - covered,
        total,
        total_in_b1,
        iterations,
        residual,
    }
}

/// `G(x_i, ·) ≤ C u₀` outside `B_{r/4}(x_i)`.
#[derive(Clone, Debug, Serialize)]
pub struct GreenBound {
    pub pole: Point,
    pub c: f64,
    pub argmax: Point,
    pub checked_nodes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchComparison {
    pub id: usize,
    pub center: Point,
    pub sigma: f64,
    pub nu: f64,
    pub ratio: Option<f64>,
    /// Absolute-continuity violation at this patch.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub patches: Vec<PatchComparison>,
    pub r_max: f64,
    pub r_min: f64,
    /// `R_max / R_min`.
    pub c_emp: f64,
    pub nu_total: f64,
    pub sigma_total: f64,
    pub measures: Vec<MeasureVector>,
    pub green: Vec<GreenBound>,
    /// Largest per-patch ratio between the weights of two poles, if there are
    /// at least two.
    pub pole_harnack: Option<f64>,
    pub flags: Vec<usize>,
    pub tolerance: f64,
}

impl ComparisonReport {
    /// Per-patch table: `patch,x,y,z,sigma,nu,ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "patch,x,y,z,sigma,nu,ratio")?;
        for p in &self.patches {
            let ratio = p.ratio.map_or(String::new(), |r| format!("{r:.12e}"));
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                p.id, p.center[0], p.center[1], p.center[2], p.sigma, p.nu, ratio
            )?;
        }
        Ok(())
    }

    /// Probability normalization error `max_i |ω_i(∂(Ω ∩ B₅)) − 1|`.
    pub fn normalization_error(&self) -> f64 {
        self.measures.iter().map(|m| (m.total - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `σ(p) = ∫_p |∇u₀| dH^{n-1}` by facet-centroid quadrature.
pub fn patch_sigma(domain: &MeasureDomain, patch: &Patch) -> Result<f64> {
    let facets = &domain.zero_set.facets;
    let mut s = Vec::with_capacity(patch.facets.len());
    for &f in &patch.facets {
        let (_, g) = domain.field.eval_with_gradient(&facets[f].centroid())?;
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        s.push(n * facets[f].measure());
    }
    Ok(ordered_sum(s.len(), |i| s[i]))
}

fn green_bound(domain: &MeasureDomain, pole: &Point, z: &[f64]) -> GreenBound {
    let sys = &domain.system;
    let g = sys.grid();
    let scale = g.spacing().powi(2 - g.dim() as i32);
    let sup = domain.field.sup_abs();
    let floor = 1e-12 * sup;
    let exclude = domain.chunk_radius / 4.0;
    let mut c = 0.0;
    let mut argmax = *pole;
    let mut checked = 0;
    for (row, &zr) in z.iter().enumerate() {
        let idx = sys.node_of(row);
        let p = g.node_point(idx);
        if dist(&p, pole) < exclude {
            continue;
        }
        let u = domain.sign as f64 * domain.field.value(idx);
        if u <= floor {
            continue;
        }
        checked += 1;
        let r = zr * scale / u;
        if r > c {
            c = r;
            argmax = p;
        }
    }
    GreenBound {
        pole: *pole,
        c,
        argmax,
        checked_nodes: checked,
    }
}

/// Compares `ν = Σ_i ω_{x_i}` with `σ = |∇u₀| dH^{n-1}` patch by patch.
///
/// A patch is flagged when one of `ν`, `σ` exceeds `10·tol` relative to its
/// total while the other is below `tol`.
pub fn measure_comparison(
    domain: &MeasureDomain,
    poles: &[Point],
    partition: &BoundaryPartition,
) -> Result<ComparisonReport> {
    if poles.is_empty() {
        return Err(Error::Precondition("no poles".into()));
    }
    let mut measures = Vec::with_capacity(poles.len());
    let mut green = Vec::with_capacity(poles.len());
    for pole in poles {
        let stencil = domain.check_pole(pole)?;
        let (z, it, res) = domain.adjoint(&stencil)?;
        measures.push(weights_from_adjoint(domain, partition, *pole, &z, it, res));
        green.push(green_bound(domain, pole, &z));
    }
    let tol = 1e-6;
    let sigmas = partition
        .patches
        .iter()
        .map(|p| patch_sigma(domain, p))
        .collect::<Result<Vec<_>>>()?;
    let nus: Vec<f64> = (0..partition.len())
        .map(|p| measures.iter().map(|m| m.weights[p]).sum())
        .collect();
    let sigma_total: f64 = sigmas.iter().sum();
    let nu_total: f64 = nus.iter().sum();
    let mut patches = Vec::with_capacity(partition.len());
    let mut flags = Vec::new();
    let (mut r_max, mut r_min) = (0.0f64, f64::INFINITY);
    for (i, p) in partition.patches.iter().enumerate() {
        let (s, n) = (sigmas[i], nus[i]);
        let sr = if sigma_total > 0.0 { s / sigma_total } else { 0.0 };
        let nr = if nu_total > 0.0 { n / nu_total } else { 0.0 };
        let flagged = (nr > 10.0 * tol && sr < tol) || (sr > 10.0 * tol && nr < tol);
        if flagged {
            flags.push(i);
        }
        let ratio = (s > 0.0).then(|| n / s);
        if let Some(r) = ratio {
            if !flagged {
                r_max = r_max.max(r);
                r_min = r_min.min(r);
            }
        }
        patches.push(PatchComparison {
            id: p.id,
            center: p.center,
            sigma: s,
            nu: n,
            ratio,
            flagged,
        });
    }
    let c_emp = if r_min > 0.0 && r_min.is_finite() {
        r_max / r_min
    } else {
        f64::INFINITY
    };
    let pole_harnack = (measures.len() >= 2).then(|| {
        let mut worst: f64 = 1.0;
        for a in &measures {
            for b in &measures {
                for (wa, wb) in a.weights.iter().zip(&b.weights) {
                    if *wa > tol * a.total_in_b1 && *wb > tol * b.total_in_b1 {
                        worst = worst.max(wa / wb);
                    }
                }
            }
        }
        worst
    });
    Ok(ComparisonReport {
        patches,
        r_max,
        r_min,
        c_emp,
        nu_total,
        sigma_total,
        measures,
        green,
        pole_harnack,
        flags,
        tolerance: domain.tolerance,
    })
}

#[cfg(test)]
mod tests;
