//! Frequency function `N(x₀,r)`, height `H(x₀,r)`, doubling indices and the
//! certificate suite built on them.

mod certificates;
mod growth;
pub mod quadrature;

pub use certificates::{
    frequency_checks, CertificateReport, DoublingCertificate, DoublingConstants, MonotoneCertificate, NormEquivalence,
    Sandwich, ThreeSphereFit, ThreeSpherePoint,
};
pub use growth::{growth_envelope, growth_envelope_with, GrowthFit, DEFAULT_ALPHA0};

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{add_scaled, norm, quad_form, sphere, Ball, CoefficientField, Point, ScalarField};
use quadrature::{ball_integral, sphere_integral};

/// `r ↦ (H, N, N_D)` at one center.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub h_values: Vec<f64>,
    pub n_values: Vec<f64>,
    /// `log₂(sup_{B_r}/sup_{B_{r/2}})`; `None` where the half ball is under-resolved (`r < 8h`).
    pub nd_values: Vec<Option<f64>>,
    /// `Ñ_D` over subballs of the largest ball.
    pub nd_tilde: Option<f64>,
    /// Whether `μ` differs from 1 (non-identity operator).
    pub mu_weight_used: bool,
}

impl FrequencyProfile {
    /// CSV rows `radius,H,N,N_D`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["radius", "H", "N", "N_D"]).map_err(io)?;
        for i in 0..self.radii.len() {
            let nd = self.nd_values[i].map(|v| v.to_string()).unwrap_or_default();
            out.write_record([
                self.radii[i].to_string(),
                self.h_values[i].to_string(),
                self.n_values[i].to_string(),
                nd,
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Dirichlet energy `∫_{B} ⟨A∇w,∇w⟩`.
pub fn energy(field: &ScalarField, operator: &CoefficientField, ball: &Ball) -> Result<f64> {
    let op = (!operator.is_identity()).then_some(operator);
    ball_integral(field, op, ball, |_, g, a, _| quad_form(a, g))
}

/// Weighted boundary mass `∫_{∂B} μ w²` with `μ` taken relative to the ball center.
pub fn boundary_mass(field: &ScalarField, operator: &CoefficientField, ball: &Ball) -> Result<f64> {
    let op = (!operator.is_identity()).then_some(operator);
    sphere_integral(field, op, ball, |v, a, d| CoefficientField::mu(a, d) * v * v)
}

/// `H(x₀,r) = r^{1−n} ∫_{∂B_r} μ w²`.
pub fn height(field: &ScalarField, operator: &CoefficientField, ball: &Ball) -> Result<f64> {
    let s = boundary_mass(field, operator, ball)?;
    Ok(s / ball.radius.powi(field.grid().dim() as i32 - 1))
}

/// `(N, H)` at one ball.
pub fn frequency_at(field: &ScalarField, operator: &CoefficientField, ball: &Ball) -> Result<(f64, f64)> {
    let h = field.grid().spacing();
    if ball.radius < 4.0 * h {
        return Err(Error::Precondition(format!(
            "radius {} is below 4h = {}",
            ball.radius,
            4.0 * h
        )));
    }
    let surface = boundary_mass(field, operator, ball)?;
    if !(surface > 0.0) {
        return Err(Error::ZeroDenominator { radius: ball.radius });
    }
    let d = energy(field, operator, ball)?;
    let dim = field.grid().dim() as i32;
    Ok((ball.radius * d / surface, surface / ball.radius.powi(dim - 1)))
}

/// `N_D(w, B) = log₂(sup_B|w| / sup_{B/2}|w|)`.
pub fn doubling_index(field: &ScalarField, ball: &Ball) -> Result<f64> {
    let h = field.grid().spacing();
    if ball.radius < 8.0 * h {
        return Err(Error::Precondition(format!(
            "radius {} is below 8h = {}",
            ball.radius,
            8.0 * h
        )));
    }
    let full = field.sup_norm_on_ball(ball)?;
    let half = field.sup_norm_on_ball(&Ball {
        center: ball.center,
        radius: ball.radius / 2.0,
    })?;
    if half == 0.0 {
        return Err(Error::ZeroDenominator {
            radius: ball.radius / 2.0,
        });
    }
    Ok((full / half).log2())
}

/// Number of lattice points per axis for subball centers of `Ñ_D`.
pub const SUBBALL_LATTICE: usize = 9;
/// Dyadic subradii `r, r/2, r/4, r/8` tried at each lattice center.
pub const SUBBALL_RADII: usize = 4;

/// `Ñ_D(w, B)`: the largest doubling index over subballs `B_s(y) ⊂ B` with
/// centers on a `9^n` lattice over the bounding cube and `s = r/2^k`,
/// `k = 0..4`. Subballs below `8h` or with a vanishing half ball are skipped.
pub fn max_doubling_index(field: &ScalarField, ball: &Ball) -> Result<(f64, Ball)> {
    let g = field.grid();
    let dim = g.dim();
    let h = g.spacing();
    let mut best: Option<(f64, Ball)> = None;
    let n = SUBBALL_LATTICE;
    let total = n.pow(dim as u32);
    for k in 0..SUBBALL_RADII {
        let s = ball.radius / f64::from(1u32 << k);
        if s < 8.0 * h {
            break;
        }
        for idx in 0..total {
            let mut y = ball.center;
            let mut rest = idx;
            for yc in y.iter_mut().take(dim) {
                let i = rest % n;
                rest /= n;
                *yc += ball.radius * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
            }
            let off = crate::field::dist(&y, &ball.center);
            if off + s > ball.radius * (1.0 + 1e-12) {
                continue;
            }
            let sub = Ball { center: y, radius: s };
            match doubling_index(field, &sub) {
                Ok(v) => {
                    if best.as_ref().is_none_or(|(b, _)| v > *b) {
                        best = Some((v, sub));
                    }
                }
                Err(Error::ZeroDenominator { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    best.ok_or_else(|| Error::DegenerateField("no resolvable subball with nonzero half-ball sup".into()))
}

/// Frequency profile at `center` over increasing `radii`.
pub fn frequency_and_h(
    field: &ScalarField,
    operator: &CoefficientField,
    center: &Point,
    radii: &[f64],
) -> Result<FrequencyProfile> {
    if operator.grid() != field.grid() {
        return Err(Error::GridMismatch);
    }
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "radii must be nonempty and strictly increasing".into(),
        ));
    }
    let h = field.grid().spacing();
    let mut h_values = Vec::with_capacity(radii.len());
    let mut n_values = Vec::with_capacity(radii.len());
    let mut nd_values = Vec::with_capacity(radii.len());
    for &r in radii {
        let ball = Ball {
            center: *center,
            radius: r,
        };
        let (n, hv) = frequency_at(field, operator, &ball)?;
        n_values.push(n);
        h_values.push(hv);
        nd_values.push(if r >= 8.0 * h {
            Some(doubling_index(field, &ball)?)
        } else {
            None
        });
    }
    let last = Ball {
        center: *center,
        radius: *radii.last().expect("nonempty"),
    };
    let nd_tilde = if last.radius >= 8.0 * h {
        Some(max_doubling_index(field, &last)?.0)
    } else {
        None
    };
    Ok(FrequencyProfile {
        center: *center,
        radii: radii.to_vec(),
        h_values,
        n_values,
        nd_values,
        nd_tilde,
        mu_weight_used: !operator.is_identity(),
    })
}

/// `sup_B |∇w|` over node gradients inside the ball and interpolated gradients on its sphere.
pub fn sup_gradient_on_ball(field: &ScalarField, ball: &Ball) -> Result<f64> {
    let g = field.grid();
    if !g.contains_ball(ball) {
        return Err(Error::DegenerateBall {
            center: ball.center,
            radius: ball.radius,
            reason: "ball leaves the grid box".into(),
        });
    }
    let mut m: f64 = 0.0;
    g.for_each_node_in_ball(ball, |i, _| {
        m = m.max(norm(&field.node_gradient(g.coords(i)).0));
    });
    for d in sphere::default_sup_directions(g.dim()) {
        let (_, grad) = field.eval_with_gradient(&add_scaled(&ball.center, ball.radius, d))?;
        m = m.max(norm(&grad));
    }
    Ok(m)
}
