//! Fixtures shared by the benchmarks.

use nodalab::{CoefficientField, GridSpec, ScalarField};

/// `xy` on the symmetric square `[-half, half]²` with spacing `h`.
pub fn product_field(half: f64, h: f64) -> (ScalarField, CoefficientField) {
    let grid = GridSpec::cube(2, half, h).expect("valid grid");
    let field = ScalarField::from_fn(&grid, "xy", |p| p[0] * p[1]).expect("finite field");
    let op = CoefficientField::identity(&grid);
    (field, op)
}
