//! Divergence-form discretization of `div(A∇w) = 0`, residual certificates and
//! Dirichlet solves on boxes and on masked (nodal-domain) regions.
//!
//! The linear system is symmetric positive definite and solved by conjugate
//! gradients with a Jacobi preconditioner. All reductions run over fixed
//! chunks in a fixed order, so results are bitwise independent of the number
//! of worker threads.

mod stencil;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{dist, Ball, CoefficientField, GridSpec, Point, ScalarField};
use crate::util::ordered_sum;
use stencil::{cross_terms, faces};

/// Smallest admissible cut fraction along a grid line.
const MIN_THETA: f64 = 1e-6;
const NONE: u32 = u32::MAX;

pub type BoundaryFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Dirichlet data: node values (interpolated at cut points) or a function.
#[derive(Clone)]
pub enum BoundaryData {
    Nodes(ScalarField),
    Function(BoundaryFn),
}

impl BoundaryData {
    pub fn function<F: Fn(&Point) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        BoundaryData::Function(Arc::new(f))
    }

    pub fn value(&self, p: &Point) -> f64 {
        match self {
            BoundaryData::Nodes(f) => f.eval(p).unwrap_or(0.0),
            BoundaryData::Function(f) => f(p),
        }
    }

    fn node_value(&self, idx: usize, p: &Point) -> f64 {
        match self {
            BoundaryData::Nodes(f) => f.value(idx),
            BoundaryData::Function(f) => f(p),
        }
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryData::Nodes(s) => write!(f, "BoundaryData::Nodes({})", s.label()),
            BoundaryData::Function(_) => write!(f, "BoundaryData::Function"),
        }
    }
}

/// Nodes where the solution is unknown, with the geometry that places the cut
/// boundary between an unknown node and a known neighbor.
#[derive(Clone, Debug)]
pub struct MaskedRegion {
    /// Candidate unknown nodes. Box-boundary nodes are always treated as known.
    pub interior: Vec<bool>,
    /// Level function whose sign change along a grid line locates the boundary
    /// by linear interpolation of the zero.
    pub level: Option<ScalarField>,
    /// Ball clipping the region; the boundary crossing is the exact line–sphere intersection.
    pub clip: Option<Ball>,
}

#[derive(Clone, Debug)]
pub enum Region {
    /// All nodes off the box boundary are unknown.
    Box,
    Masked(MaskedRegion),
}

#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub operator: CoefficientField,
    pub region: Region,
    pub boundary: BoundaryData,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: ScalarField,
    /// Max-norm discrete residual over unknown nodes, normalized by `sup|solution|`.
    pub residual_linf: f64,
    pub iterations: usize,
    pub tolerance: f64,
}

/// Boundary contribution to a row: `rhs[row] += weight · g(point)`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryLink {
    pub row: usize,
    pub weight: f64,
    pub point: Point,
    /// Node carrying the value when the boundary point is a grid node.
    pub node: Option<usize>,
}

/// Assembled SPD system `M x = b` for the unknown nodes of a Dirichlet problem.
#[derive(Clone, Debug)]
pub struct System {
    grid: GridSpec,
    unknown: Vec<u32>,
    nodes: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    inv_diag: Vec<f64>,
    links: Vec<BoundaryLink>,
}

struct Row {
    entries: Vec<(u32, f64)>,
    diag: f64,
    links: Vec<BoundaryLink>,
}

/// Fraction along the segment `p → p + t·(n - p)` at which it leaves the ball.
fn sphere_exit(ball: &Ball, p: &Point, n: &Point) -> f64 {
    let d = [n[0] - p[0], n[1] - p[1], n[2] - p[2]];
    let m = [p[0] - ball.center[0], p[1] - ball.center[1], p[2] - ball.center[2]];
    let a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let b = 2.0 * (m[0] * d[0] + m[1] * d[1] + m[2] * d[2]);
    let c = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] - ball.radius * ball.radius;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
}

impl System {
    pub fn assemble(problem: &DirichletProblem) -> Result<System> {
        let op = &problem.operator;
        let grid = op.grid().clone();
        if let BoundaryData::Nodes(f) = &problem.boundary {
            if f.grid() != &grid {
                return Err(Error::GridMismatch);
            }
        }
        let n = grid.node_count();
        let masked = match &problem.region {
            Region::Box => None,
            Region::Masked(m) => {
                if m.interior.len() != n {
                    return Err(Error::GridMismatch);
                }
                if let Some(l) = &m.level {
                    if l.grid() != &grid {
                        return Err(Error::GridMismatch);
                    }
                }
                Some(m)
            }
        };
        let level_thr = masked
            .and_then(|m| m.level.as_ref())
            .map(|l| 1e-12 * l.sup_abs())
            .unwrap_or(0.0);
        let is_unknown = |idx: usize| -> bool {
            let c = grid.coords(idx);
            if grid.on_box_boundary(c) {
                return false;
            }
            match masked {
                None => true,
                Some(m) => {
                    if !m.interior[idx] {
                        return false;
                    }
                    if let Some(l) = &m.level {
                        if l.value(idx).abs() <= level_thr {
                            return false;
                        }
                    }
                    if let Some(b) = &m.clip {
                        if dist(&grid.node_point(idx), &b.center) >= b.radius {
                            return false;
                        }
                    }
                    true
                }
            }
        };
        let mut unknown = vec![NONE; n];
        let mut nodes = Vec::new();
        for (idx, slot) in unknown.iter_mut().enumerate() {
            if is_unknown(idx) {
                *slot = nodes.len() as u32;
                nodes.push(idx);
            }
        }
        if nodes.is_empty() {
            return Err(Error::Precondition("Dirichlet region has no unknown nodes".into()));
        }
        if nodes.len() >= NONE as usize {
            return Err(Error::Precondition("too many unknowns".into()));
        }
        let h = grid.spacing();
        let rows: Vec<Row> = nodes
            .par_iter()
            .enumerate()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(fbuf, xbuf), (row, &idx)| {
                    let c = grid.coords(idx);
                    let p = grid.node_point(idx);
                    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(12);
                    let mut links = Vec::new();
                    let mut diag = 0.0;
                    faces(op, c, fbuf);
                    for f in fbuf.iter() {
                        let u = unknown[f.node];
                        if u != NONE {
                            diag += f.coef;
                            entries.push((u, -f.coef));
                            continue;
                        }
                        let q = grid.point_at(f.coords);
                        let mut theta: f64 = 1.0;
                        if let Some(m) = masked {
                            if let Some(l) = &m.level {
                                let up = l.value(idx);
                                let un = l.value(f.node);
                                if up * un <= 0.0 || un.abs() <= level_thr {
                                    theta = theta.min(up / (up - un));
                                }
                            }
                            if let Some(b) = &m.clip {
                                if dist(&q, &b.center) >= b.radius {
                                    theta = theta.min(sphere_exit(b, &p, &q));
                                }
                            }
                        }
                        let theta = theta.clamp(MIN_THETA, 1.0);
                        let weight = f.coef / theta;
                        diag += weight;
                        let (point, node) = if theta == 1.0 {
                            (q, Some(f.node))
                        } else {
                            let mut cut = p;
                            cut[f.axis] += f.dir as f64 * theta * h;
                            (cut, None)
                        };
                        links.push(BoundaryLink {
                            row,
                            weight,
                            point,
                            node,
                        });
                    }
                    let cell_ok = |cell: [usize; 3]| match masked {
                        None => true,
                        Some(_) => {
                            (0..grid.corners_per_cell()).all(|k| unknown[grid.index_of(grid.corner(cell, k))] != NONE)
                        }
                    };
                    cross_terms(op, c, cell_ok, xbuf);
                    for &(q, qc, coef) in xbuf.iter() {
                        if q == idx {
                            diag += coef;
                        } else if unknown[q] != NONE {
                            entries.push((unknown[q], coef));
                        } else {
                            links.push(BoundaryLink {
                                row,
                                weight: -coef,
                                point: grid.point_at(qc),
                                node: Some(q),
                            });
                        }
                    }
                    entries.sort_by_key(|e| e.0);
                    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
                    for (col, v) in entries {
                        match merged.last_mut() {
                            Some(last) if last.0 == col => last.1 += v,
                            _ => merged.push((col, v)),
                        }
                    }
                    Row {
                        entries: merged,
                        diag,
                        links,
                    }
                },
            )
            .collect();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz: usize = rows.iter().map(|r| r.entries.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let mut diag = Vec::with_capacity(rows.len());
        let mut inv_diag = Vec::with_capacity(rows.len());
        let mut links = Vec::new();
        row_ptr.push(0);
        for r in rows {
            if !(r.diag > 0.0) {
                return Err(Error::CoefficientValidation(
                    "discrete operator lost positivity (non-positive diagonal)".into(),
                ));
            }
            for (c, v) in r.entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
            diag.push(r.diag);
            inv_diag.push(1.0 / r.diag);
            links.extend(r.links);
        }
        // the diagonal is stored separately from the off-diagonal CSR part
        Ok(System {
            grid,
            unknown,
            nodes,
            row_ptr,
            cols,
            vals,
            diag,
            inv_diag,
            links,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn unknown_count(&self) -> usize {
        self.nodes.len()
    }

    /// Unknown index of a node, if the node is unknown.
    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        match self.unknown[node] {
            NONE => None,
            u => Some(u as usize),
        }
    }

    pub fn node_of(&self, row: usize) -> usize {
        self.nodes[row]
    }

    pub fn links(&self) -> &[BoundaryLink] {
        &self.links
    }

    /// Right-hand side for boundary data `g`.
    pub fn rhs(&self, g: &BoundaryData) -> Vec<f64> {
        let mut b = vec![0.0; self.nodes.len()];
        for l in &self.links {
            let v = match l.node {
                Some(n) => g.node_value(n, &l.point),
                None => g.value(&l.point),
            };
            b[l.row] += l.weight * v;
        }
        b
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(r, out)| {
            let mut s = self.diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = s;
        });
    }

    fn iteration_cap(&self) -> usize {
        (50.0 * (self.grid.node_count() as f64).sqrt()).ceil() as usize
    }

    /// Normalized residual `max|b - Mx| / h² / scale`.
    fn normalized(&self, r: &[f64], scale: f64) -> f64 {
        let m = r
            .par_iter()
            .with_min_len(4096)
            .map(|v| v.abs())
            .reduce(|| 0.0, f64::max);
        let h2 = self.grid.spacing() * self.grid.spacing();
        if scale > 0.0 {
            m / h2 / scale
        } else {
            m / h2
        }
    }

    /// Solves `M x = b` by Jacobi-preconditioned conjugate gradients until the
    /// residual, in units of the continuous operator and normalized by
    /// `max(sup|x|, known_sup)`, is at most `tol`.
    pub fn solve(&self, b: &[f64], tol: f64, known_sup: f64) -> Result<(Vec<f64>, usize, f64)> {
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
        }
        let n = self.nodes.len();
        let cap = self.iteration_cap();
        let dot = |a: &[f64], b: &[f64]| ordered_sum(a.len(), |i| a[i] * b[i]);
        let sup = |x: &[f64]| {
            x.par_iter()
                .with_min_len(4096)
                .map(|v| v.abs())
                .reduce(|| 0.0, f64::max)
        };
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut q = vec![0.0; n];
        let mut best = f64::INFINITY;
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let scale = |x: &[f64]| sup(x).max(known_sup);
        let res0 = self.normalized(&r, scale(&x));
        if res0 <= tol {
            return Ok((x, 0, res0));
        }
        for it in 1..=cap {
            self.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            x.par_iter_mut()
                .zip(r.par_iter_mut())
                .zip(p.par_iter().zip(q.par_iter()))
                .with_min_len(4096)
                .for_each(|((x, r), (p, q))| {
                    *x += alpha * p;
                    *r -= alpha * q;
                });
            let res = self.normalized(&r, scale(&x));
            if res <= tol {
                // confirm with the true residual; continue from it if recursion drifted
                self.apply(&x, &mut q);
                r.par_iter_mut()
                    .zip(b.par_iter().zip(q.par_iter()))
                    .with_min_len(4096)
                    .for_each(|(r, (b, q))| *r = b - q);
                let true_res = self.normalized(&r, scale(&x));
                best = best.min(true_res);
                if true_res <= tol {
                    return Ok((x, it, true_res));
                }
                z = r.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
                continue;
            }
            best = best.min(res);
            z.par_iter_mut()
                .zip(r.par_iter().zip(self.inv_diag.par_iter()))
                .with_min_len(4096)
                .for_each(|(z, (r, d))| *z = r * d);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut()
                .zip(z.par_iter())
                .with_min_len(4096)
                .for_each(|(p, z)| *p = z + beta * *p);
        }
        Err(Error::Convergence {
            iterations: cap,
            best_residual: best,
        })
    }
}

/// Max over interior nodes of `|L_h w|`, normalized by `sup|w|` over the grid.
pub fn residual_norm(field: &ScalarField, operator: &CoefficientField) -> Result<f64> {
    let g = field.grid();
    if g != operator.grid() {
        return Err(Error::GridMismatch);
    }
    let sup = field.sup_abs();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let h2 = g.spacing() * g.spacing();
    let u = field.values();
    let worst = (0..g.node_count())
        .into_par_iter()
        .with_min_len(1024)
        .map_init(
            || (Vec::new(), Vec::new()),
            |(fbuf, xbuf), idx| {
                let c = g.coords(idx);
                if g.on_box_boundary(c) {
                    return 0.0;
                }
                faces(operator, c, fbuf);
                let mut s = 0.0;
                for f in fbuf.iter() {
                    s += f.coef * (u[idx] - u[f.node]);
                }
                cross_terms(operator, c, |_| true, xbuf);
                for &(q, _, coef) in xbuf.iter() {
                    s += coef * u[q];
                }
                s.abs()
            },
        )
        .reduce(|| 0.0, f64::max);
    Ok(worst / h2 / sup)
}

/// Solves a Dirichlet problem; nodes outside the unknown set carry the boundary data.
pub fn solve_dirichlet(problem: &DirichletProblem, tolerance: f64) -> Result<SolveReport> {
    let system = System::assemble(problem)?;
    let b = system.rhs(&problem.boundary);
    let known_sup = system
        .links
        .iter()
        .map(|l| match l.node {
            Some(n) => problem.boundary.node_value(n, &l.point).abs(),
            None => problem.boundary.value(&l.point).abs(),
        })
        .fold(0.0, f64::max);
    let (x, iterations, _) = system.solve(&b, tolerance, known_sup)?;
    let solution = system.expand(&x, &problem.boundary)?;
    let residual_linf = match problem.region {
        Region::Box => residual_norm(&solution, &problem.operator)?,
        Region::Masked(_) => {
            let mut r = vec![0.0; x.len()];
            system.apply(&x, &mut r);
            for (r, b) in r.iter_mut().zip(&b) {
                *r = b - *r;
            }
            system.normalized(&r, solution.sup_abs())
        }
    };
    Ok(SolveReport {
        solution,
        residual_linf,
        iterations,
        tolerance,
    })
}

impl System {
    /// Full-grid field from unknown values, filling known nodes with `g`.
    pub fn expand(&self, x: &[f64], g: &BoundaryData) -> Result<ScalarField> {
        let grid = &self.grid;
        let values: Vec<f64> = (0..grid.node_count())
            .into_par_iter()
            .map(|idx| match self.unknown[idx] {
                NONE => g.node_value(idx, &grid.node_point(idx)),
                u => x[u as usize],
            })
            .collect();
        ScalarField::new(grid.clone(), values, "solution")
    }
}
