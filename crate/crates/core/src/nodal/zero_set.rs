use rayon::prelude::*;
use serde::Serialize;

use super::kdtree::FacetIndex;
use super::total_signs;
use crate::error::{Error, Result};
use crate::field::{dist, Ball, GridSpec, Point, ScalarField};

/// A piece of the discrete zero set: a segment `a–b` in 2D or a triangle
/// `a–b–c` in 3D, extracted from grid cell `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Facet {
    pub a: Point,
    pub b: Point,
    pub c: Option<Point>,
    pub cell: usize,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Facet {
    /// Length (2D) or area (3D).
    pub fn measure(&self) -> f64 {
        match self.c {
            None => dist(&self.a, &self.b),
            Some(c) => {
                let n = cross(&sub(&self.b, &self.a), &sub(&c, &self.a));
                0.5 * dot(&n, &n).sqrt()
            }
        }
    }

    pub fn centroid(&self) -> Point {
        match self.c {
            None => [
                0.5 * (self.a[0] + self.b[0]),
                0.5 * (self.a[1] + self.b[1]),
                0.5 * (self.a[2] + self.b[2]),
            ],
            Some(c) => [
                (self.a[0] + self.b[0] + c[0]) / 3.0,
                (self.a[1] + self.b[1] + c[1]) / 3.0,
                (self.a[2] + self.b[2] + c[2]) / 3.0,
            ],
        }
    }

    /// Largest distance from the centroid to a vertex.
    pub fn radius(&self) -> f64 {
        let m = self.centroid();
        let r = dist(&m, &self.a).max(dist(&m, &self.b));
        match self.c {
            None => r,
            Some(c) => r.max(dist(&m, &c)),
        }
    }

    /// Exact Euclidean distance from `p` to the facet.
    pub fn distance(&self, p: &Point) -> f64 {
        match self.c {
            None => point_segment(p, &self.a, &self.b),
            Some(c) => point_triangle(p, &self.a, &self.b, &c),
        }
    }

    /// Measure of the part of the facet inside `ball`: exact for segments,
    /// by recursive subdivision for triangles.
    pub fn clipped_measure(&self, ball: &Ball) -> f64 {
        match self.c {
            None => segment_in_ball(&self.a, &self.b, ball),
            Some(c) => triangle_in_ball(&self.a, &self.b, &c, ball, 4),
        }
    }
}

fn point_segment(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(&ab, &ab);
    let t = if l2 > 0.0 {
        (dot(&sub(p, a), &ab) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    dist(p, &q)
}

/// Closest-point-on-triangle by Voronoi regions.
fn point_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return dist(p, a);
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return dist(p, b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return point_segment(p, a, b);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return dist(p, c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return point_segment(p, a, c);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return point_segment(p, b, c);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let q = [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ];
    dist(p, &q)
}

fn segment_in_ball(a: &Point, b: &Point, ball: &Ball) -> f64 {
    let d = sub(b, a);
    let m = sub(a, &ball.center);
    let qa = dot(&d, &d);
    if qa == 0.0 {
        return 0.0;
    }
    let qb = 2.0 * dot(&m, &d);
    let qc = dot(&m, &m) - ball.radius * ball.radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return 0.0;
    }
    let s = disc.sqrt();
    let t0 = ((-qb - s) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + s) / (2.0 * qa)).min(1.0);
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * qa.sqrt()
    }
}

fn triangle_in_ball(a: &Point, b: &Point, c: &Point, ball: &Ball, depth: u32) -> f64 {
    let ins = [ball.contains(a), ball.contains(b), ball.contains(c)];
    let f = Facet {
        a: *a,
        b: *b,
        c: Some(*c),
        cell: 0,
    };
    if ins.iter().all(|&x| x) {
        return f.measure();
    }
    let m = f.centroid();
    if dist(&m, &ball.center) > ball.radius + f.radius() {
        return 0.0;
    }
    if depth == 0 {
        return if ball.contains(&m) { f.measure() } else { 0.0 };
    }
    let mid = |p: &Point, q: &Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])];
    let ab = mid(a, b);
    let bc = mid(b, c);
    let ca = mid(c, a);
    triangle_in_ball(a, &ab, &ca, ball, depth - 1)
        + triangle_in_ball(&ab, b, &bc, ball, depth - 1)
        + triangle_in_ball(&ca, &bc, c, ball, depth - 1)
        + triangle_in_ball(&ab, &bc, &ca, ball, depth - 1)
}

/// The discrete zero set `Z(w)`: facets of the multilinear interpolant's sign
/// interface and their total measure clipped to the region.
#[derive(Clone, Debug)]
pub struct ZeroSet {
    dim: usize,
    pub facets: Vec<Facet>,
    pub total_area: f64,
    pub region: Option<Ball>,
    index: FacetIndex,
}

impl ZeroSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    /// Exact distance from `p` to the nearest facet.
    pub fn distance(&self, p: &Point) -> f64 {
        self.index
            .nearest(&self.facets, p)
            .map(|(d, _)| d)
            .unwrap_or(f64::INFINITY)
    }

    /// Distance and index of the nearest facet.
    pub fn nearest(&self, p: &Point) -> Option<(f64, usize)> {
        self.index.nearest(&self.facets, p)
    }

    /// Indices of facets whose distance to `p` is at most `r`, ascending.
    pub fn facets_within(&self, p: &Point, r: f64) -> Vec<usize> {
        self.index.within(&self.facets, p, r)
    }

    /// Total measure of the facets inside `ball`.
    pub fn measure_in_ball(&self, ball: &Ball) -> f64 {
        let reach = self.index.max_radius();
        self.index
            .candidates(&ball.center, ball.radius + reach)
            .into_iter()
            .map(|i| self.facets[i].clipped_measure(ball))
            .sum()
    }
}

// Tetrahedra of the cube split along the 0–7 diagonal; shared faces agree
// between neighboring cubes.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 3, 2, 7],
    [0, 2, 6, 7],
    [0, 6, 4, 7],
    [0, 4, 5, 7],
    [0, 5, 1, 7],
];

fn crossing(pa: &Point, pb: &Point, va: f64, vb: f64) -> Point {
    let t = if va == vb {
        0.5
    } else {
        (va / (va - vb)).clamp(0.0, 1.0)
    };
    [
        pa[0] + t * (pb[0] - pa[0]),
        pa[1] + t * (pb[1] - pa[1]),
        pa[2] + t * (pb[2] - pa[2]),
    ]
}

fn cell_facets(grid: &GridSpec, values: &[f64], signs: &[i8], cell: [usize; 3], out: &mut Vec<Facet>) {
    let dim = grid.dim();
    let ncorner = 1 << dim;
    let mut idx = [0usize; 8];
    let mut pts = [[0.0; 3]; 8];
    let mut s = [0i8; 8];
    for k in 0..ncorner {
        let c = grid.corner(cell, k);
        idx[k] = grid.index_of(c);
        pts[k] = grid.point_at(c);
        s[k] = signs[idx[k]];
    }
    if s[..ncorner].iter().all(|&x| x == s[0]) {
        return;
    }
    let cid = grid.cell_index(cell);
    let v = |k: usize| values[idx[k]];
    let x = |a: usize, b: usize| crossing(&pts[a], &pts[b], v(a), v(b));
    if dim == 2 {
        // edges: 0:(0,1) 1:(1,3) 2:(2,3) 3:(0,2)
        const EDGES: [(usize, usize); 4] = [(0, 1), (1, 3), (2, 3), (0, 2)];
        let cut: Vec<usize> = (0..4).filter(|&e| s[EDGES[e].0] != s[EDGES[e].1]).collect();
        let seg = |e0: usize, e1: usize, out: &mut Vec<Facet>| {
            out.push(Facet {
                a: x(EDGES[e0].0, EDGES[e0].1),
                b: x(EDGES[e1].0, EDGES[e1].1),
                c: None,
                cell: cid,
            });
        };
        if cut.len() == 2 {
            seg(cut[0], cut[1], out);
        } else if cut.len() == 4 {
            // saddle: the bilinear center value decides which diagonal pair connects
            let center = 0.25 * (v(0) + v(1) + v(2) + v(3));
            let cs = if center >= 0.0 { 1 } else { -1 };
            if cs == s[0] {
                seg(0, 1, out);
                seg(2, 3, out);
            } else {
                seg(0, 3, out);
                seg(1, 2, out);
            }
        }
        return;
    }
    for t in TETS.iter() {
        let pos: Vec<usize> = t.iter().copied().filter(|&k| s[k] > 0).collect();
        let neg: Vec<usize> = t.iter().copied().filter(|&k| s[k] <= 0).collect();
        match (pos.len(), neg.len()) {
            (1, 3) | (3, 1) => {
                let (lone, others) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
                out.push(Facet {
                    a: x(lone, others[0]),
                    b: x(lone, others[1]),
                    c: Some(x(lone, others[2])),
                    cell: cid,
                });
            }
            (2, 2) => {
                let p0 = x(pos[0], neg[0]);
                let p1 = x(pos[0], neg[1]);
                let p2 = x(pos[1], neg[1]);
                let p3 = x(pos[1], neg[0]);
                out.push(Facet {
                    a: p0,
                    b: p1,
                    c: Some(p2),
                    cell: cid,
                });
                out.push(Facet {
                    a: p0,
                    b: p2,
                    c: Some(p3),
                    cell: cid,
                });
            }
            _ => {}
        }
    }
}

fn extract(field: &ScalarField, region: Option<Ball>) -> Result<ZeroSet> {
    let g = field.grid();
    let signs = total_signs(field);
    let values = field.values();
    let half_diag = 0.5 * g.spacing() * (g.dim() as f64).sqrt();
    if let Some(b) = &region {
        let mut any = false;
        g.for_each_node_in_ball(b, |i, _| any |= values[i] != 0.0);
        if !any {
            return Err(Error::DegenerateField(format!(
                "field '{}' vanishes identically in the region",
                field.label()
            )));
        }
    } else if field.sup_abs() == 0.0 {
        return Err(Error::DegenerateField(format!(
            "field '{}' vanishes identically",
            field.label()
        )));
    }
    let cells: Vec<usize> = (0..g.cell_count())
        .filter(|&c| match &region {
            None => true,
            Some(b) => dist(&g.cell_center(g.cell_coords(c)), &b.center) <= b.radius + half_diag,
        })
        .collect();
    let chunks: Vec<Vec<Facet>> = cells
        .par_chunks(2048)
        .map(|chunk| {
            let mut out = Vec::new();
            for &c in chunk {
                cell_facets(g, values, &signs, g.cell_coords(c), &mut out);
            }
            out
        })
        .collect();
    let facets: Vec<Facet> = chunks.into_iter().flatten().collect();
    if facets.is_empty() {
        return Err(Error::DegenerateField(format!(
            "field '{}' has no zero crossings in the region",
            field.label()
        )));
    }
    let total_area = match &region {
        None => facets.iter().map(|f| f.measure()).sum(),
        Some(b) => facets.iter().map(|f| f.clipped_measure(b)).sum(),
    };
    let index = FacetIndex::build(&facets);
    Ok(ZeroSet {
        dim: g.dim(),
        facets,
        total_area,
        region,
        index,
    })
}

/// Zero set of `field` in the cells meeting `region`, with measure clipped to it.
pub fn extract_zero_set(field: &ScalarField, region: &Ball) -> Result<ZeroSet> {
    extract(field, Some(*region))
}

/// Zero set over the whole grid.
pub fn extract_zero_set_full(field: &ScalarField) -> Result<ZeroSet> {
    extract(field, None)
}
