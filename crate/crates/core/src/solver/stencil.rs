//! Energy-consistent divergence-form stencil.
//!
//! The discrete operator is `L_h u = -(M u)/h²` where `M` is the Hessian of
//! the discrete energy
//!
//! `E(u) = Σ_faces a_f (u_q - u_p)² h^{n-2} + Σ_cells 2 Σ_{k<l} a_kl(c) g_k g_l h^n`,
//!
//! `a_f` the harmonic mean of `e·A·e` at the two face nodes, `a_kl(c)` the
//! corner average of an off-diagonal entry and `g_k` the cell-averaged
//! difference quotient along axis `k`.

use crate::field::{CoefficientField, GridSpec};

/// A face of the 2·dim stencil: neighbor node, face coefficient, axis and direction (±1).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Face {
    pub node: usize,
    pub coords: [usize; 3],
    pub coef: f64,
    pub axis: usize,
    pub dir: i8,
}

#[inline]
fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Faces of an interior node (all neighbors exist).
pub(crate) fn faces(op: &CoefficientField, c: [usize; 3], out: &mut Vec<Face>) {
    out.clear();
    let g = op.grid();
    let p = g.index_of(c);
    let identity = op.is_identity();
    for a in 0..g.dim() {
        for dir in [-1i8, 1] {
            let mut nc = c;
            nc[a] = (c[a] as isize + dir as isize) as usize;
            let n = g.index_of(nc);
            let coef = if identity {
                1.0
            } else {
                harmonic_mean(op.entry(p, a, a), op.entry(n, a, a))
            };
            out.push(Face {
                node: n,
                coords: nc,
                coef,
                axis: a,
                dir,
            });
        }
    }
}

/// Off-diagonal contributions `(node, coefficient)` of row `c` of `M`,
/// restricted to cells accepted by `cell_ok`. Entries may repeat a node.
pub(crate) fn cross_terms<F>(op: &CoefficientField, c: [usize; 3], cell_ok: F, out: &mut Vec<(usize, [usize; 3], f64)>)
where
    F: Fn([usize; 3]) -> bool,
{
    out.clear();
    if !op.has_cross_terms() {
        return;
    }
    let g: &GridSpec = op.grid();
    let dim = g.dim();
    let cc = g.cell_counts();
    let pairs: &[(usize, usize)] = if dim == 2 { &[(0, 1)] } else { &[(0, 1), (0, 2), (1, 2)] };
    let scale = 1.0 / (1usize << (2 * (dim - 1))) as f64;
    for sigma in 0..(1usize << dim) {
        // p sits at corner `sigma` of the cell whose lower corner is c - sigma
        let mut cell = [0usize; 3];
        let mut valid = true;
        for a in 0..3 {
            let bit = if a < dim { (sigma >> a) & 1 } else { 0 };
            if c[a] < bit || c[a] - bit >= cc[a] {
                valid = false;
                break;
            }
            cell[a] = c[a] - bit;
        }
        if !valid || !cell_ok(cell) {
            continue;
        }
        let mut akl = [0.0; 3];
        for corner in 0..(1usize << dim) {
            let q = g.index_of(g.corner(cell, corner));
            for (e, (k, l)) in pairs.iter().enumerate() {
                akl[e] += op.entry(q, *k, *l);
            }
        }
        let inv = 1.0 / (1usize << dim) as f64;
        let sp = |a: usize| if (sigma >> a) & 1 == 1 { 1.0 } else { -1.0 };
        for tau in 0..(1usize << dim) {
            let sq = |a: usize| if (tau >> a) & 1 == 1 { 1.0 } else { -1.0 };
            let mut coef = 0.0;
            for (e, (k, l)) in pairs.iter().enumerate() {
                coef += akl[e] * inv * (sp(*k) * sq(*l) + sp(*l) * sq(*k));
            }
            if coef != 0.0 {
                let qc = g.corner(cell, tau);
                out.push((g.index_of(qc), qc, coef * scale));
            }
        }
    }
}
