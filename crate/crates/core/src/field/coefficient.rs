use rayon::prelude::*;

use super::{GridSpec, Point};
use crate::error::{Error, Result};

/// Symmetric matrix packed as `[a11, a22, a33, a12, a13, a23]`.
pub type SymMat = [f64; 6];

pub const IDENTITY: SymMat = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];

#[inline]
pub(crate) fn sym_entry(m: &SymMat, k: usize, l: usize) -> f64 {
    match (k.min(l), k.max(l)) {
        (0, 0) => m[0],
        (1, 1) => m[1],
        (2, 2) => m[2],
        (0, 1) => m[3],
        (0, 2) => m[4],
        _ => m[5],
    }
}

/// `⟨M v, v⟩`.
#[inline]
pub fn quad_form(m: &SymMat, v: &Point) -> f64 {
    m[0] * v[0] * v[0]
        + m[1] * v[1] * v[1]
        + m[2] * v[2] * v[2]
        + 2.0 * (m[3] * v[0] * v[1] + m[4] * v[0] * v[2] + m[5] * v[1] * v[2])
}

/// Extreme eigenvalues of the leading `dim × dim` block.
fn eigen_range(m: &SymMat, dim: usize) -> (f64, f64) {
    if dim == 2 {
        let tr = 0.5 * (m[0] + m[1]);
        let d = (0.25 * (m[0] - m[1]).powi(2) + m[3] * m[3]).sqrt();
        return (tr - d, tr + d);
    }
    // closed-form eigenvalues of a symmetric 3×3 matrix
    let p1 = m[3] * m[3] + m[4] * m[4] + m[5] * m[5];
    let q = (m[0] + m[1] + m[2]) / 3.0;
    if p1 == 0.0 {
        let lo = m[0].min(m[1]).min(m[2]);
        let hi = m[0].max(m[1]).max(m[2]);
        return (lo, hi);
    }
    let p2 = (m[0] - q).powi(2) + (m[1] - q).powi(2) + (m[2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = [
        (m[0] - q) / p,
        (m[1] - q) / p,
        (m[2] - q) / p,
        m[3] / p,
        m[4] / p,
        m[5] / p,
    ];
    let det =
        b[0] * (b[1] * b[2] - b[5] * b[5]) - b[3] * (b[3] * b[2] - b[5] * b[4]) + b[4] * (b[3] * b[5] - b[1] * b[4]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    (e3, e1)
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Identity,
    Isotropic(Vec<f64>),
    Full(Vec<SymMat>),
}

/// The coefficient matrix field `A(x)` of `div(A∇w) = 0`, stored per node,
/// with its measured ellipticity `λ` (`λ·I ≤ A ≤ λ⁻¹·I`) and Lipschitz bound `Λ₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    grid: GridSpec,
    storage: Storage,
    lambda: f64,
    lambda1: f64,
}

impl CoefficientField {
    /// `A = I`.
    pub fn identity(grid: &GridSpec) -> Self {
        CoefficientField {
            grid: grid.clone(),
            storage: Storage::Identity,
            lambda: 1.0,
            lambda1: 0.0,
        }
    }

    /// `A = a(x)·I` from node values.
    pub fn isotropic(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        Self::finish(grid, Storage::Isotropic(values))
    }

    /// `A = a(x)·I` sampled from a function.
    pub fn isotropic_from_fn<F>(grid: &GridSpec, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Sync,
    {
        let values = (0..grid.node_count())
            .into_par_iter()
            .map(|i| f(&grid.node_point(i)))
            .collect();
        Self::isotropic(grid, values)
    }

    /// General field sampled from a function returning full matrices; rejects
    /// non-symmetric or non-elliptic matrices.
    pub fn from_fn<F>(grid: &GridSpec, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> [[f64; 3]; 3] + Sync,
    {
        let dim = grid.dim();
        let entries: Result<Vec<SymMat>> = (0..grid.node_count())
            .into_par_iter()
            .map(|i| {
                let p = grid.node_point(i);
                let a = f(&p);
                for k in 0..dim {
                    for l in 0..k {
                        let scale = a[k][l].abs().max(a[l][k].abs()).max(1.0);
                        if (a[k][l] - a[l][k]).abs() > 1e-12 * scale {
                            return Err(Error::CoefficientValidation(format!(
                                "A is not symmetric at {p:?}: a{k}{l} = {} vs a{l}{k} = {}",
                                a[k][l], a[l][k]
                            )));
                        }
                    }
                }
                Ok(if dim == 2 {
                    [a[0][0], a[1][1], 1.0, a[0][1], 0.0, 0.0]
                } else {
                    [a[0][0], a[1][1], a[2][2], a[0][1], a[0][2], a[1][2]]
                })
            })
            .collect();
        Self::finish(grid, Storage::Full(entries?))
    }

    fn finish(grid: &GridSpec, storage: Storage) -> Result<Self> {
        let mut field = CoefficientField {
            grid: grid.clone(),
            storage,
            lambda: 1.0,
            lambda1: 0.0,
        };
        let dim = grid.dim();
        let n = grid.node_count();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let m = field.matrix(i);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::CoefficientValidation(format!(
                    "non-finite entry at {:?}",
                    grid.node_point(i)
                )));
            }
            let (a, b) = eigen_range(&m, dim);
            if a <= 0.0 {
                return Err(Error::CoefficientValidation(format!(
                    "A is not elliptic at {:?} (smallest eigenvalue {a})",
                    grid.node_point(i)
                )));
            }
            lo = lo.min(a);
            hi = hi.max(b);
        }
        field.lambda = lo.min(1.0 / hi);
        field.lambda1 = field.measure_lipschitz();
        Ok(field)
    }

    fn measure_lipschitz(&self) -> f64 {
        if matches!(self.storage, Storage::Identity) {
            return 0.0;
        }
        let g = &self.grid;
        let h = g.spacing();
        (0..g.node_count())
            .into_par_iter()
            .map(|i| {
                let c = g.coords(i);
                let m = self.matrix(i);
                let mut worst: f64 = 0.0;
                for (dir, nb) in g.face_neighbors(c) {
                    if dir % 2 == 0 {
                        continue;
                    }
                    let q = self.matrix(g.index_of(nb));
                    for e in 0..6 {
                        worst = worst.max((m[e] - q[e]).abs() / h);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Checks the declared constants against the measured ones.
    pub fn validate_bounds(&self, lambda: f64, lambda1: f64) -> Result<()> {
        if self.lambda < lambda {
            return Err(Error::CoefficientValidation(format!(
                "ellipticity {} below declared λ = {lambda}",
                self.lambda
            )));
        }
        if self.lambda1 > lambda1 {
            return Err(Error::CoefficientValidation(format!(
                "Lipschitz estimate {} above declared Λ₁ = {lambda1}",
                self.lambda1
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Measured ellipticity constant λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Measured finite-difference Lipschitz bound Λ₁.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.storage, Storage::Identity)
    }

    /// Whether any off-diagonal entry is nonzero.
    pub fn has_cross_terms(&self) -> bool {
        match &self.storage {
            Storage::Full(v) => v.iter().any(|m| m[3] != 0.0 || m[4] != 0.0 || m[5] != 0.0),
            _ => false,
        }
    }

    /// Matrix at a node.
    #[inline]
    pub fn matrix(&self, idx: usize) -> SymMat {
        match &self.storage {
            Storage::Identity => IDENTITY,
            Storage::Isotropic(v) => [v[idx], v[idx], v[idx], 0.0, 0.0, 0.0],
            Storage::Full(v) => v[idx],
        }
    }

    /// Entry `a_kl` at a node.
    #[inline]
    pub fn entry(&self, idx: usize, k: usize, l: usize) -> f64 {
        match &self.storage {
            Storage::Identity => {
                if k == l {
                    1.0
                } else {
                    0.0
                }
            }
            Storage::Isotropic(v) => {
                if k == l {
                    v[idx]
                } else {
                    0.0
                }
            }
            Storage::Full(v) => sym_entry(&v[idx], k, l),
        }
    }

    /// Multilinear interpolation of the matrix at `p`.
    pub fn interpolate(&self, p: &Point) -> Result<SymMat> {
        if let Storage::Identity = self.storage {
            self.grid.locate(p)?;
            return Ok(IDENTITY);
        }
        let (cell, frac) = self.grid.locate(p)?;
        Ok(self.interpolate_cell(cell, frac))
    }

    pub(crate) fn interpolate_cell(&self, cell: [usize; 3], frac: [f64; 3]) -> SymMat {
        if let Storage::Identity = self.storage {
            return IDENTITY;
        }
        let dim = self.grid.dim();
        let mut m = [0.0; 6];
        for corner in 0..(1 << dim) {
            let mut w = 1.0;
            for (a, f) in frac.iter().enumerate().take(dim) {
                w *= if (corner >> a) & 1 == 1 { *f } else { 1.0 - f };
            }
            if w == 0.0 {
                continue;
            }
            let a = self.matrix(self.grid.index_of(self.grid.corner(cell, corner)));
            for e in 0..6 {
                m[e] += w * a[e];
            }
        }
        m
    }

    /// `μ(x) = ⟨A(x)(x−x₀), x−x₀⟩ / |x−x₀|²` given the unit direction from the center.
    #[inline]
    pub fn mu(m: &SymMat, unit_dir: &Point) -> f64 {
        quad_form(m, unit_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> GridSpec {
        GridSpec::cube(2, 1.0, 0.125).unwrap()
    }

    #[test]
    fn identity_bounds() {
        let a = CoefficientField::identity(&grid2());
        assert_eq!(a.lambda(), 1.0);
        assert_eq!(a.lambda1(), 0.0);
        assert!(a.validate_bounds(1.0, 0.0).is_ok());
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let g = grid2();
        let asym = CoefficientField::from_fn(&g, |_| [[1.0, 0.2, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(asym, Err(Error::CoefficientValidation(_))));
        let indef = CoefficientField::from_fn(&g, |_| [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(indef, Err(Error::CoefficientValidation(_))));
    }

    #[test]
    fn isotropic_lipschitz_and_ellipticity() {
        let g = grid2();
        let a = CoefficientField::isotropic_from_fn(&g, |p| 2.0 + 0.5 * p[0]).unwrap();
        assert!((a.lambda1() - 0.5).abs() < 1e-12);
        // eigenvalues in [1.5, 2.5]: λ = min(1.5, 1/2.5) = 0.4
        assert!((a.lambda() - 0.4).abs() < 1e-12);
        assert!(a.validate_bounds(0.4, 0.5).is_ok());
        assert!(a.validate_bounds(0.5, 0.5).is_err());
        assert!(a.validate_bounds(0.4, 0.4).is_err());
    }

    #[test]
    fn eigen_range_3d_matches_known_spectrum() {
        // eigenvalues of [[2,1,0],[1,2,0],[0,0,5]] are 1, 3, 5
        let (lo, hi) = eigen_range(&[2.0, 2.0, 5.0, 1.0, 0.0, 0.0], 3);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_affine_entries() {
        let g = grid2();
        let a = CoefficientField::from_fn(&g, |p| {
            let c = 0.1 * p[1];
            [[1.0, c, 0.0], [c, 1.0, 0.0], [0.0, 0.0, 1.0]]
        })
        .unwrap();
        let m = a.interpolate(&[0.3, 0.45, 0.0]).unwrap();
        assert!((m[3] - 0.045).abs() < 1e-15);
        assert!(a.has_cross_terms());
    }
}
