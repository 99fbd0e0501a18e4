//! Deterministic direction sets and quadrature rules on unit spheres.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::Point;
use crate::util::gauss_legendre;

/// Default angular samples per great circle for ball suprema.
pub const SUP_SAMPLES_PER_CIRCLE: usize = 256;
/// Surface quadrature points for the frequency function in 2D.
pub const SURFACE_POINTS_2D: usize = 512;
/// Gauss–Legendre nodes in `cos φ` and longitudes of the 3D surface rule (2048 points).
pub const SURFACE_GL_3D: usize = 32;
pub const SURFACE_LON_3D: usize = 64;
/// Directions scanned by one enlarge step.
pub const ENLARGE_DIRECTIONS_2D: usize = 512;
pub const ENLARGE_DIRECTIONS_3D: usize = 2048;

/// `n` equispaced unit vectors in the plane, starting at +x, counterclockwise.
pub fn circle(n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [t.cos(), t.sin(), 0.0]
        })
        .collect()
}

/// Latitude–longitude net on the unit 2-sphere with about `per_circle` samples
/// along every great circle through the poles.
pub fn lat_long(per_circle: usize) -> Vec<Point> {
    let n_lat = (per_circle / 2).max(2);
    let mut dirs = vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    for i in 1..n_lat {
        let phi = PI * i as f64 / n_lat as f64;
        let (s, c) = phi.sin_cos();
        let n_lon = ((per_circle as f64 * s).round() as usize).max(4);
        for k in 0..n_lon {
            let t = 2.0 * PI * k as f64 / n_lon as f64;
            dirs.push([s * t.cos(), s * t.sin(), c]);
        }
    }
    dirs
}

/// Quasi-uniform spiral (Fibonacci) point set of `n` unit vectors.
pub fn fibonacci(n: usize) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * k as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Directions used for sphere samples in ball suprema.
pub fn sup_directions(dim: usize, per_circle: usize) -> Vec<Point> {
    if dim == 2 {
        circle(per_circle)
    } else {
        lat_long(per_circle)
    }
}

/// Default sup directions, cached.
pub fn default_sup_directions(dim: usize) -> &'static [Point] {
    static D2: OnceLock<Vec<Point>> = OnceLock::new();
    static D3: OnceLock<Vec<Point>> = OnceLock::new();
    if dim == 2 {
        D2.get_or_init(|| circle(SUP_SAMPLES_PER_CIRCLE))
    } else {
        D3.get_or_init(|| lat_long(SUP_SAMPLES_PER_CIRCLE))
    }
}

/// Directions scanned by the enlarge step, cached. Index order is the tie-break order.
pub fn enlarge_directions(dim: usize) -> &'static [Point] {
    static D2: OnceLock<Vec<Point>> = OnceLock::new();
    static D3: OnceLock<Vec<Point>> = OnceLock::new();
    if dim == 2 {
        D2.get_or_init(|| circle(ENLARGE_DIRECTIONS_2D))
    } else {
        D3.get_or_init(|| fibonacci(ENLARGE_DIRECTIONS_3D))
    }
}

/// Quadrature on the unit sphere: directions with weights summing to the
/// sphere's measure (2π in 2D, 4π in 3D). Cached.
pub fn surface_rule(dim: usize) -> &'static [(Point, f64)] {
    static R2: OnceLock<Vec<(Point, f64)>> = OnceLock::new();
    static R3: OnceLock<Vec<(Point, f64)>> = OnceLock::new();
    if dim == 2 {
        R2.get_or_init(|| {
            let w = 2.0 * PI / SURFACE_POINTS_2D as f64;
            circle(SURFACE_POINTS_2D).into_iter().map(|d| (d, w)).collect()
        })
    } else {
        R3.get_or_init(|| {
            let (z, wz) = gauss_legendre(SURFACE_GL_3D);
            let wl = 2.0 * PI / SURFACE_LON_3D as f64;
            let mut rule = Vec::with_capacity(SURFACE_GL_3D * SURFACE_LON_3D);
            for (zi, wi) in z.iter().zip(&wz) {
                let s = (1.0 - zi * zi).sqrt();
                for k in 0..SURFACE_LON_3D {
                    let t = 2.0 * PI * (k as f64 + 0.5) / SURFACE_LON_3D as f64;
                    rule.push(([s * t.cos(), s * t.sin(), *zi], wi * wl));
                }
            }
            rule
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_rules_have_total_measure() {
        let s2: f64 = surface_rule(2).iter().map(|(_, w)| w).sum();
        assert!((s2 - 2.0 * PI).abs() < 1e-12);
        let s3: f64 = surface_rule(3).iter().map(|(_, w)| w).sum();
        assert!((s3 - 4.0 * PI).abs() < 1e-12);
        assert_eq!(surface_rule(3).len(), 2048);
    }

    #[test]
    fn surface_rule_3d_integrates_quadratics() {
        // ∫_{S²} x² = 4π/3
        let i: f64 = surface_rule(3).iter().map(|(d, w)| w * d[0] * d[0]).sum();
        assert!((i - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn direction_sets_are_unit() {
        for d in lat_long(64).iter().chain(fibonacci(100).iter()) {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
