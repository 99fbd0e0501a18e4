use rayon::prelude::*;

use super::sphere;
use super::{add_scaled, Ball, GridSpec, Point};
use crate::error::{Error, Result};

/// A sampled field on a uniform grid, evaluated between nodes by multilinear
/// interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    label: String,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "field '{label}' has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(label));
        }
        Ok(ScalarField { grid, values, label })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: &GridSpec, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..grid.node_count())
            .into_par_iter()
            .map(|i| f(&grid.node_point(i)))
            .collect();
        ScalarField::new(grid.clone(), values, label)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn at(&self, c: [usize; 3]) -> f64 {
        self.values[self.grid.index_of(c)]
    }

    /// `c · w`, keeping the label.
    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            label: self.label.clone(),
        }
    }

    /// Largest absolute node value over the whole grid.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Node-wise linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64, label: &str) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        ScalarField::new(self.grid.clone(), values, label)
    }

    #[inline]
    pub(crate) fn interpolate(&self, cell: [usize; 3], frac: [f64; 3]) -> f64 {
        let dim = self.grid.dim();
        let mut v = 0.0;
        for corner in 0..(1 << dim) {
            let mut w = 1.0;
            for (a, f) in frac.iter().enumerate().take(dim) {
                w *= if (corner >> a) & 1 == 1 { *f } else { 1.0 - f };
            }
            if w != 0.0 {
                v += w * self.at(self.grid.corner(cell, corner));
            }
        }
        v
    }

    /// Multilinear interpolation at `p`.
    pub fn eval(&self, p: &Point) -> Result<f64> {
        let (cell, frac) = self.grid.locate(p)?;
        Ok(self.interpolate(cell, frac))
    }

    /// Gradient at a node by central differences, or second-order one-sided
    /// differences on the box boundary. The flag reports a one-sided stencil.
    pub fn node_gradient(&self, c: [usize; 3]) -> (Point, bool) {
        let g = &self.grid;
        let h = g.spacing();
        let counts = g.counts();
        let mut grad = [0.0; 3];
        let mut one_sided = false;
        for a in 0..g.dim() {
            let n = counts[a];
            let shifted = |d: isize| {
                let mut q = c;
                q[a] = (c[a] as isize + d) as usize;
                self.at(q)
            };
            grad[a] = if c[a] > 0 && c[a] + 1 < n {
                (shifted(1) - shifted(-1)) / (2.0 * h)
            } else {
                one_sided = true;
                if n == 2 {
                    let s = if c[a] == 0 { 1 } else { -1 };
                    s as f64 * (shifted(s) - shifted(0)) / h
                } else if c[a] == 0 {
                    (-3.0 * shifted(0) + 4.0 * shifted(1) - shifted(2)) / (2.0 * h)
                } else {
                    (3.0 * shifted(0) - 4.0 * shifted(-1) + shifted(-2)) / (2.0 * h)
                }
            };
        }
        (grad, one_sided)
    }

    /// Value and gradient at `p`: the value is the multilinear interpolant, the
    /// gradient interpolates nodal finite-difference gradients.
    pub fn eval_with_gradient(&self, p: &Point) -> Result<(f64, Point)> {
        let (cell, frac) = self.grid.locate(p)?;
        let dim = self.grid.dim();
        let mut v = 0.0;
        let mut grad = [0.0; 3];
        for corner in 0..(1 << dim) {
            let mut w = 1.0;
            for (a, f) in frac.iter().enumerate().take(dim) {
                w *= if (corner >> a) & 1 == 1 { *f } else { 1.0 - f };
            }
            if w == 0.0 {
                continue;
            }
            let c = self.grid.corner(cell, corner);
            v += w * self.at(c);
            let (g, _) = self.node_gradient(c);
            for a in 0..dim {
                grad[a] += w * g[a];
            }
        }
        Ok((v, grad))
    }

    /// Whether the gradient at `p` involves one-sided differences (within one
    /// cell of the box boundary).
    pub fn gradient_is_one_sided(&self, p: &Point) -> bool {
        self.grid.box_distance(p) < self.grid.spacing()
    }

    /// Gradient of the multilinear interpolant of one cell at local coordinates `frac`.
    pub fn cell_gradient(&self, cell: [usize; 3], frac: [f64; 3]) -> Point {
        let dim = self.grid.dim();
        let h = self.grid.spacing();
        let mut grad = [0.0; 3];
        for corner in 0..(1 << dim) {
            let v = self.at(self.grid.corner(cell, corner));
            for (a, g) in grad.iter_mut().enumerate().take(dim) {
                let mut w = if (corner >> a) & 1 == 1 { 1.0 / h } else { -1.0 / h };
                for (b, f) in frac.iter().enumerate().take(dim) {
                    if b != a {
                        w *= if (corner >> b) & 1 == 1 { *f } else { 1.0 - f };
                    }
                }
                *g += w * v;
            }
        }
        grad
    }

    fn check_ball(&self, ball: &Ball) -> Result<()> {
        if !self.grid.contains_ball(ball) {
            return Err(Error::DegenerateBall {
                center: ball.center,
                radius: ball.radius,
                reason: "ball leaves the grid box".into(),
            });
        }
        Ok(())
    }

    /// `sup_{B}|w|` over nodes inside the ball and interpolated samples on its
    /// sphere (default 256 samples per great circle).
    pub fn sup_norm_on_ball(&self, ball: &Ball) -> Result<f64> {
        self.sup_norm_on_ball_with(ball, sphere::default_sup_directions(self.grid.dim()))
    }

    /// As [`sup_norm_on_ball`](Self::sup_norm_on_ball) with an explicit direction set.
    pub fn sup_norm_on_ball_with(&self, ball: &Ball, dirs: &[Point]) -> Result<f64> {
        self.extremum_on_ball(ball, dirs, f64::abs)
    }

    /// Maximum of `g(w)` over nodes in the ball and sphere samples.
    pub fn extremum_on_ball<G: Fn(f64) -> f64>(&self, ball: &Ball, dirs: &[Point], g: G) -> Result<f64> {
        self.check_ball(ball)?;
        let mut m = f64::NEG_INFINITY;
        let mut count = 0usize;
        self.grid.for_each_node_in_ball(ball, |i, _| {
            m = m.max(g(self.values[i]));
            count += 1;
        });
        if count == 0 && ball.radius < self.grid.spacing() {
            return Err(Error::DegenerateBall {
                center: ball.center,
                radius: ball.radius,
                reason: "no grid node inside a ball smaller than the spacing".into(),
            });
        }
        for d in dirs {
            let p = add_scaled(&ball.center, ball.radius, d);
            let (cell, frac) = self.grid.locate(&p)?;
            m = m.max(g(self.interpolate(cell, frac)));
        }
        Ok(m)
    }

    /// Rescales so that `sup_{B}|w| = 1`; returns the field and the factor applied.
    pub fn normalized_on_ball(&self, ball: &Ball) -> Result<(ScalarField, f64)> {
        let s = self.sup_norm_on_ball(ball)?;
        if s == 0.0 {
            return Err(Error::DegenerateField(format!(
                "field '{}' vanishes on the normalization ball",
                self.label
            )));
        }
        // already normalized up to the roundoff of a previous normalization
        if (s - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok((self.clone(), 1.0));
        }
        Ok((self.scaled(1.0 / s), 1.0 / s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(h: f64, half: f64) -> GridSpec {
        GridSpec::cube(2, half, h).unwrap()
    }

    #[test]
    fn linear_field_exact() {
        let g = grid(1.0 / 16.0, 1.0);
        let f = ScalarField::from_fn(&g, "x", |p| p[0]).unwrap();
        let (v, grad) = f.eval_with_gradient(&[0.3, 0.7, 0.0]).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        assert!((grad[0] - 1.0).abs() < 1e-13 && grad[1].abs() < 1e-13);
    }

    #[test]
    fn constant_field() {
        let g = grid(0.125, 1.0);
        let f = ScalarField::from_fn(&g, "c", |_| 5.0).unwrap();
        let (v, grad) = f.eval_with_gradient(&[-0.41, 0.13, 0.0]).unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(grad, [0.0; 3]);
    }

    #[test]
    fn product_field_value_and_gradient() {
        let g = grid(1.0 / 128.0, 1.0);
        let f = ScalarField::from_fn(&g, "xy", |p| p[0] * p[1]).unwrap();
        let (v, grad) = f.eval_with_gradient(&[0.5, 0.25, 0.0]).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
        assert!((grad[0] - 0.25).abs() < 1e-3 && (grad[1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn gradient_error_decays_quadratically_off_nodes() {
        // f = sin(x)·y evaluated at a point that is not a node for any h
        let p: Point = [0.3141, 0.2718, 0.0];
        let exact = [p[0].cos() * p[1], p[0].sin()];
        let errs: Vec<f64> = [64.0, 128.0, 256.0]
            .iter()
            .map(|n| {
                let g = grid(1.0 / n, 1.0);
                let f = ScalarField::from_fn(&g, "f", |q| q[0].sin() * q[1]).unwrap();
                let (_, grad) = f.eval_with_gradient(&p).unwrap();
                (grad[0] - exact[0]).abs().max((grad[1] - exact[1]).abs())
            })
            .collect();
        // gradient of the interpolant of central differences: O(h²)
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
        assert!(errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn one_sided_gradient_at_box_edge() {
        let g = grid(0.125, 1.0);
        let f = ScalarField::from_fn(&g, "q", |p| p[0] * p[0]).unwrap();
        let (grad, flag) = f.node_gradient([0, 8, 0]);
        assert!(flag);
        // second-order one-sided stencil is exact for quadratics
        assert!((grad[0] + 2.0).abs() < 1e-12);
        assert!(f.gradient_is_one_sided(&[-0.95, 0.0, 0.0]));
    }

    #[test]
    fn out_of_box_is_error() {
        let g = grid(0.125, 1.0);
        let f = ScalarField::from_fn(&g, "x", |p| p[0]).unwrap();
        assert!(matches!(f.eval(&[2.0, 0.0, 0.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn sup_of_product_on_balls() {
        let g = grid(1.0 / 64.0, 8.5);
        let f = ScalarField::from_fn(&g, "xy", |p| p[0] * p[1]).unwrap();
        let s1 = f.sup_norm_on_ball(&Ball::centered(1.0).unwrap()).unwrap();
        assert!((s1 - 0.5).abs() < 1e-6, "{s1}");
        let s8 = f.sup_norm_on_ball(&Ball::centered(8.0).unwrap()).unwrap();
        assert!((s8 - 32.0).abs() < 1e-3, "{s8}");
        let z = ScalarField::from_fn(&g, "0", |_| 0.0).unwrap();
        assert_eq!(z.sup_norm_on_ball(&Ball::centered(2.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn tiny_ball_between_nodes_is_degenerate() {
        let g = grid(0.125, 1.0);
        let f = ScalarField::from_fn(&g, "x", |p| p[0]).unwrap();
        let b = Ball::new([0.06, 0.06, 0.0], 0.01).unwrap();
        assert!(matches!(f.sup_norm_on_ball(&b), Err(Error::DegenerateBall { .. })));
    }

    #[test]
    fn normalization_is_idempotent() {
        let g = grid(1.0 / 16.0, 2.0);
        let f = ScalarField::from_fn(&g, "xy", |p| 3.0 * p[0] * p[1]).unwrap();
        let b = Ball::centered(1.5).unwrap();
        let (n1, _) = f.normalized_on_ball(&b).unwrap();
        let (n2, c) = n1.normalized_on_ball(&b).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(n1, n2);
    }

    proptest! {
        #[test]
        fn multilinear_fields_interpolate_exactly(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0,
            x in -1.0f64..1.0, y in -1.0f64..1.0,
        ) {
            let g = grid(0.125, 1.0);
            let f = ScalarField::from_fn(&g, "m", |p| a + b * p[0] + c * p[1] + d * p[0] * p[1]).unwrap();
            let exact = a + b * x + c * y + d * x * y;
            let v = f.eval(&[x, y, 0.0]).unwrap();
            prop_assert!((v - exact).abs() <= 1e-13 * (1.0 + exact.abs()));
        }

        #[test]
        fn sup_is_monotone_in_radius(
            c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0,
            r1 in 0.1f64..1.9, dr in 0.0f64..1.0,
        ) {
            let g = grid(1.0 / 32.0, 3.0);
            let f = ScalarField::from_fn(&g, "h", |p| {
                c0 * p[0] + c1 * (p[0] * p[0] - p[1] * p[1]) + c2 * (p[0].powi(3) - 3.0 * p[0] * p[1] * p[1])
            }).unwrap();
            let r2 = (r1 + dr).min(2.9);
            let s1 = f.sup_norm_on_ball(&Ball::centered(r1).unwrap()).unwrap();
            let s2 = f.sup_norm_on_ball(&Ball::centered(r2).unwrap()).unwrap();
            prop_assert!(s1 <= s2);
        }
    }
}
