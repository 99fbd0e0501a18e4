//! Grids, scalar and coefficient fields, interpolation, ball suprema and the
//! `.nfield` file format.

mod coefficient;
mod grid;
mod io;
mod scalar;
pub mod sphere;

pub use coefficient::{quad_form, CoefficientField, SymMat, IDENTITY};
pub use grid::{Ball, GridSpec};
pub use io::{read_nfield, write_nfield, NFIELD_MAGIC};
pub use scalar::ScalarField;

/// A point in the plane or in space. Two-dimensional points keep `z = 0`.
pub type Point = [f64; 3];

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[inline]
pub fn add_scaled(a: &Point, s: f64, b: &Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Pads a coordinate slice of length 2 or 3 to a [`Point`].
pub fn point(coords: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (d, c) in p.iter_mut().zip(coords) {
        *d = *c;
    }
    p
}
