use serde::{Deserialize, Serialize};

use super::{dist, Point};
use crate::error::{Error, Result};

/// Uniform isotropic grid over a box in two or three dimensions.
///
/// Nodes are indexed row-major with the x axis slowest:
/// `index = (i * ny + j) * nz + k`. In 2D `nz = 1` and `k = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    origin: Point,
    spacing: f64,
    counts: [usize; 3],
}

/// Closed Euclidean ball `B_r(center)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::DegenerateBall {
                center,
                radius,
                reason: "radius must be positive".into(),
            });
        }
        Ok(Ball { center, radius })
    }

    /// Ball centered at the origin.
    pub fn centered(radius: f64) -> Result<Self> {
        Ball::new([0.0; 3], radius)
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        dist(p, &self.center) <= self.radius
    }
}

impl GridSpec {
    pub fn new(dim: usize, origin: &[f64], spacing: f64, counts: &[usize]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if origin.len() != dim || counts.len() != dim {
            return Err(Error::InvalidGrid(format!("origin and counts need {dim} entries")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing {spacing} not positive")));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidGrid("every axis needs at least 2 nodes".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin not finite".into()));
        }
        let mut o = [0.0; 3];
        let mut c = [1usize; 3];
        o[..dim].copy_from_slice(origin);
        c[..dim].copy_from_slice(counts);
        Ok(GridSpec {
            dim,
            origin: o,
            spacing,
            counts: c,
        })
    }

    /// Grid over the box `[lo, hi]` (per axis). The upper corner is rounded up to
    /// the next node.
    pub fn from_box(dim: usize, lo: &[f64], hi: &[f64], spacing: f64) -> Result<Self> {
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidGrid(format!("box corners need {dim} entries")));
        }
        let counts: Vec<usize> = (0..dim)
            .map(|a| ((hi[a] - lo[a]) / spacing - 1e-9).ceil().max(1.0) as usize + 1)
            .collect();
        GridSpec::new(dim, lo, spacing, &counts)
    }

    /// Symmetric grid covering `[-half_width, half_width]^dim` with a node at the
    /// origin.
    pub fn cube(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        let m = (half_width / spacing - 1e-9).ceil().max(1.0) as usize;
        let o = -(m as f64) * spacing;
        GridSpec::new(dim, &vec![o; dim], spacing, &vec![2 * m + 1; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Node counts per axis; the unused third axis of a 2D grid has count 1.
    #[inline]
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    /// Cell counts per axis (1 on the unused axis of a 2D grid).
    #[inline]
    pub fn cell_counts(&self) -> [usize; 3] {
        let mut c = [1; 3];
        for (a, item) in c.iter_mut().enumerate().take(self.dim) {
            *item = self.counts[a] - 1;
        }
        c
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        let c = self.cell_counts();
        c[0] * c[1] * c[2]
    }

    /// Number of corners of a cell, `2^dim`.
    #[inline]
    pub fn corners_per_cell(&self) -> usize {
        1 << self.dim
    }

    /// Lower corner of the covered box.
    pub fn lo(&self) -> Point {
        self.origin
    }

    /// Upper corner of the covered box.
    pub fn hi(&self) -> Point {
        let mut p = self.origin;
        for (a, item) in p.iter_mut().enumerate().take(self.dim) {
            *item += (self.counts[a] - 1) as f64 * self.spacing;
        }
        p
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.counts[1] + j) * self.counts[2] + k
    }

    #[inline]
    pub fn index_of(&self, c: [usize; 3]) -> usize {
        self.index(c[0], c[1], c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.counts[2];
        let r = idx / self.counts[2];
        let j = r % self.counts[1];
        let i = r / self.counts[1];
        [i, j, k]
    }

    #[inline]
    pub fn point_at(&self, c: [usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for (a, item) in p.iter_mut().enumerate().take(self.dim) {
            *item = self.origin[a] + c[a] as f64 * self.spacing;
        }
        p
    }

    #[inline]
    pub fn node_point(&self, idx: usize) -> Point {
        self.point_at(self.coords(idx))
    }

    /// Whether a node lies on the boundary of the grid box.
    #[inline]
    pub fn on_box_boundary(&self, c: [usize; 3]) -> bool {
        (0..self.dim).any(|a| c[a] == 0 || c[a] + 1 == self.counts[a])
    }

    /// Distance from `p` to the boundary of the grid box (negative outside).
    pub fn box_distance(&self, p: &Point) -> f64 {
        let hi = self.hi();
        (0..self.dim)
            .map(|a| (p[a] - self.origin[a]).min(hi[a] - p[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `p` is inside the closed grid box up to a relative tolerance.
    pub fn contains(&self, p: &Point) -> bool {
        self.box_distance(p) >= -1e-12 * self.spacing
    }

    /// Whether the whole ball lies inside the grid box.
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        self.box_distance(&ball.center) >= ball.radius - 1e-12 * self.spacing
    }

    /// Cell containing `p` and local coordinates in `[0, 1]^dim`. Points on the
    /// upper box face are assigned to the last cell.
    pub fn locate(&self, p: &Point) -> Result<([usize; 3], [f64; 3])> {
        if !self.contains(p) {
            return Err(Error::OutOfDomain(*p));
        }
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.dim {
            let t = (p[a] - self.origin[a]) / self.spacing;
            let max_cell = (self.counts[a] - 2) as f64;
            let i = t.floor().clamp(0.0, max_cell);
            cell[a] = i as usize;
            frac[a] = (t - i).clamp(0.0, 1.0);
        }
        Ok((cell, frac))
    }

    /// Node coordinates of the cell `c` corner selected by the bit pattern
    /// `corner` (bit `a` set means +1 along axis `a`).
    #[inline]
    pub fn corner(&self, c: [usize; 3], corner: usize) -> [usize; 3] {
        [
            c[0] + (corner & 1),
            c[1] + ((corner >> 1) & 1),
            c[2] + ((corner >> 2) & 1),
        ]
    }

    #[inline]
    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        let cc = self.cell_counts();
        (c[0] * cc[1] + c[1]) * cc[2] + c[2]
    }

    #[inline]
    pub fn cell_coords(&self, idx: usize) -> [usize; 3] {
        let cc = self.cell_counts();
        let k = idx % cc[2];
        let r = idx / cc[2];
        [r / cc[1], r % cc[1], k]
    }

    /// Center of a cell.
    pub fn cell_center(&self, c: [usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for (a, item) in p.iter_mut().enumerate().take(self.dim) {
            *item = self.origin[a] + (c[a] as f64 + 0.5) * self.spacing;
        }
        p
    }

    /// Inclusive node index ranges of the bounding box of a ball, clamped to the grid.
    pub fn node_range(&self, ball: &Ball) -> [(usize, usize); 3] {
        let mut r = [(0usize, 0usize); 3];
        for (a, item) in r.iter_mut().enumerate().take(self.dim) {
            let lo = ((ball.center[a] - ball.radius - self.origin[a]) / self.spacing).ceil();
            let hi = ((ball.center[a] + ball.radius - self.origin[a]) / self.spacing).floor();
            let max = (self.counts[a] - 1) as f64;
            let lo = lo.clamp(0.0, max) as usize;
            let hi = hi.clamp(0.0, max) as usize;
            *item = (lo, hi);
        }
        r
    }

    /// Calls `f(index, point)` for every node inside the closed ball, in index order.
    pub fn for_each_node_in_ball<F: FnMut(usize, &Point)>(&self, ball: &Ball, mut f: F) {
        let r = self.node_range(ball);
        let r2 = ball.radius * ball.radius * (1.0 + 1e-12);
        for i in r[0].0..=r[0].1 {
            for j in r[1].0..=r[1].1 {
                for k in r[2].0..=r[2].1 {
                    let c = [i, j, k];
                    let p = self.point_at(c);
                    let d2 = (p[0] - ball.center[0]).powi(2)
                        + (p[1] - ball.center[1]).powi(2)
                        + (p[2] - ball.center[2]).powi(2);
                    if d2 <= r2 {
                        f(self.index_of(c), &p);
                    }
                }
            }
        }
    }

    /// Indices of all nodes inside the closed ball, in index order.
    pub fn nodes_in_ball(&self, ball: &Ball) -> Vec<usize> {
        let mut v = Vec::new();
        self.for_each_node_in_ball(ball, |i, _| v.push(i));
        v
    }

    /// Face neighbors of a node that exist on the grid, in the order
    /// −x, +x, −y, +y, (−z, +z).
    pub fn face_neighbors(&self, c: [usize; 3]) -> impl Iterator<Item = (usize, [usize; 3])> + '_ {
        (0..self.dim).flat_map(move |a| {
            let down = if c[a] > 0 {
                let mut n = c;
                n[a] -= 1;
                Some((2 * a, n))
            } else {
                None
            };
            let up = if c[a] + 1 < self.counts[a] {
                let mut n = c;
                n[a] += 1;
                Some((2 * a + 1, n))
            } else {
                None
            };
            down.into_iter().chain(up)
        })
    }
}
