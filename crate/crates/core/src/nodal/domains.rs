use std::collections::VecDeque;

use serde::Serialize;

use super::total_signs;
use super::zero_set::{extract_zero_set, ZeroSet};
use crate::error::Result;
use crate::field::{dist, Ball, Point, ScalarField};

const NONE: u32 = u32::MAX;

/// One face-connected component of same-sign cells.
#[derive(Clone, Debug, Serialize)]
pub struct NodalDomain {
    pub id: usize,
    pub sign: i8,
    /// Owned cell indices, ascending.
    pub cells: Vec<usize>,
    /// Indices into the zero set's facets bounding this domain.
    pub boundary_facets: Vec<usize>,
    /// Center of the lexicographically first owned cell.
    pub seed: Point,
}

impl NodalDomain {
    pub fn owns_cell(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

/// The nodal domains of a field in a region, with the zero set they were cut from.
#[derive(Clone, Debug)]
pub struct DomainPartition {
    pub region: Ball,
    pub zero_set: ZeroSet,
    pub domains: Vec<NodalDomain>,
    /// Radius of the inner ball (a quarter of the region) used for the domain count.
    pub inner_radius: f64,
    /// Number of domains meeting the inner ball.
    pub count_meeting_inner: usize,
    signs: Vec<i8>,
    cell_owner: Vec<u32>,
}

impl DomainPartition {
    /// Partition from an already extracted zero set.
    pub fn from_zero_set(field: &ScalarField, region: &Ball, zero_set: ZeroSet) -> Self {
        let g = field.grid();
        let signs = total_signs(field);
        let dim = g.dim();
        let ncells = g.cell_count();
        let ncorner = 1 << dim;
        let half_diag = 0.5 * g.spacing() * (dim as f64).sqrt();
        // owned: all corners share a sign and the center is in the region
        let mut owner_sign = vec![0i8; ncells];
        for (c, slot) in owner_sign.iter_mut().enumerate() {
            let cc = g.cell_coords(c);
            if !region.contains(&g.cell_center(cc)) {
                continue;
            }
            let s0 = signs[g.index_of(g.corner(cc, 0))];
            if (1..ncorner).all(|k| signs[g.index_of(g.corner(cc, k))] == s0) {
                *slot = s0;
            }
        }
        let cell_counts = g.cell_counts();
        let mut cell_owner = vec![NONE; ncells];
        let mut domains: Vec<NodalDomain> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..ncells {
            if owner_sign[start] == 0 || cell_owner[start] != NONE {
                continue;
            }
            let id = domains.len() as u32;
            let sign = owner_sign[start];
            let mut cells = Vec::new();
            cell_owner[start] = id;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                cells.push(c);
                let cc = g.cell_coords(c);
                for a in 0..dim {
                    for d in [-1isize, 1] {
                        let n = cc[a] as isize + d;
                        if n < 0 || n >= cell_counts[a] as isize {
                            continue;
                        }
                        let mut nc = cc;
                        nc[a] = n as usize;
                        let ni = g.cell_index(nc);
                        if owner_sign[ni] == sign && cell_owner[ni] == NONE {
                            cell_owner[ni] = id;
                            queue.push_back(ni);
                        }
                    }
                }
            }
            cells.sort_unstable();
            domains.push(NodalDomain {
                id: id as usize,
                sign,
                seed: g.cell_center(g.cell_coords(cells[0])),
                cells,
                boundary_facets: Vec::new(),
            });
        }
        // facets bound every domain owning a cell in the 3^n neighborhood of their cell
        for (fi, f) in zero_set.facets.iter().enumerate() {
            let cc = g.cell_coords(f.cell);
            let mut seen: Vec<u32> = Vec::new();
            for_each_neighbor_cell(cc, dim, cell_counts, |nc| {
                let o = cell_owner[g.cell_index(nc)];
                if o != NONE && !seen.contains(&o) {
                    seen.push(o);
                }
            });
            seen.sort_unstable();
            for o in seen {
                domains[o as usize].boundary_facets.push(fi);
            }
        }
        let inner_radius = region.radius / 4.0;
        let count_meeting_inner = domains
            .iter()
            .filter(|d| {
                d.cells
                    .iter()
                    .any(|&c| dist(&g.cell_center(g.cell_coords(c)), &region.center) <= inner_radius + half_diag)
            })
            .count();
        DomainPartition {
            region: *region,
            zero_set,
            domains,
            inner_radius,
            count_meeting_inner,
            signs,
            cell_owner,
        }
    }

    /// Total node signs used for the partition.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn owner_of_cell(&self, cell: usize) -> Option<usize> {
        match self.cell_owner[cell] {
            NONE => None,
            o => Some(o as usize),
        }
    }

    /// Domain containing `p`: the owner of its cell, or for a cell cut by the
    /// zero set, the lowest-id adjacent domain whose sign matches the
    /// interpolated sign at `p`.
    pub fn domain_at(&self, field: &ScalarField, p: &Point) -> Option<usize> {
        let g = field.grid();
        let (cc, _) = g.locate(p).ok()?;
        let ci = g.cell_index(cc);
        if let Some(o) = self.owner_of_cell(ci) {
            return Some(o);
        }
        let v = field.eval(p).ok()?;
        if v == 0.0 {
            return None;
        }
        let s = if v > 0.0 { 1 } else { -1 };
        let mut best: Option<usize> = None;
        for_each_neighbor_cell(cc, g.dim(), g.cell_counts(), |nc| {
            if let Some(o) = self.owner_of_cell(g.cell_index(nc)) {
                if self.domains[o].sign == s && best.is_none_or(|b| o < b) {
                    best = Some(o);
                }
            }
        });
        best
    }

    /// Nodes that are corners of cells owned by domain `id`.
    pub fn node_mask(&self, field: &ScalarField, id: usize) -> Vec<bool> {
        let g = field.grid();
        let mut mask = vec![false; g.node_count()];
        for &c in &self.domains[id].cells {
            let cc = g.cell_coords(c);
            for k in 0..g.corners_per_cell() {
                mask[g.index_of(g.corner(cc, k))] = true;
            }
        }
        mask
    }

    /// Boundary facet measure of domain `id` inside `ball`.
    pub fn boundary_measure_in(&self, id: usize, ball: &Ball) -> f64 {
        self.domains[id]
            .boundary_facets
            .iter()
            .map(|&f| self.zero_set.facets[f].clipped_measure(ball))
            .sum()
    }
}

pub(crate) fn for_each_neighbor_cell<F: FnMut([usize; 3])>(cc: [usize; 3], dim: usize, counts: [usize; 3], mut f: F) {
    let r = |a: usize| -> (isize, isize) {
        if a < dim {
            (-1, 1)
        } else {
            (0, 0)
        }
    };
    let (x0, x1) = r(0);
    let (y0, y1) = r(1);
    let (z0, z1) = r(2);
    for dx in x0..=x1 {
        for dy in y0..=y1 {
            for dz in z0..=z1 {
                let n = [cc[0] as isize + dx, cc[1] as isize + dy, cc[2] as isize + dz];
                if (0..3).all(|a| n[a] >= 0 && n[a] < counts[a] as isize) {
                    f([n[0] as usize, n[1] as usize, n[2] as usize]);
                }
            }
        }
    }
}

/// Nodal domains of `field` in `region`, the zero set they are cut from, and
/// the number of domains meeting the concentric ball of a quarter radius.
pub fn nodal_domains(field: &ScalarField, region: &Ball) -> Result<DomainPartition> {
    let zs = extract_zero_set(field, region)?;
    Ok(DomainPartition::from_zero_set(field, region, zs))
}
