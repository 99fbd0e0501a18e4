use serde::Serialize;

use super::{check_equality, ratio_field};
use crate::error::{Error, Result};
use crate::field::{Ball, CoefficientField, ScalarField};
use crate::frequency::doubling_index;
use crate::solver::residual_norm;

#[derive(Clone, Debug)]
pub struct TransferConfig {
    /// Bound on the doubling index of `u` on the region.
    pub n0: f64,
    /// `D_emp` at or below this passes.
    pub cap: f64,
    /// Residual certificate both fields must meet.
    pub residual_tol: f64,
    pub region: Ball,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            n0: 3.0,
            cap: 4.0,
            residual_tol: 1e-8,
            region: Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TransferReport {
    /// `log₂(sup_{B₁}|v| / sup_{B_{1/2}}|v|)`.
    pub d_emp: f64,
    pub nd_u: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub pass: bool,
}

/// Doubling index of `v` given that it shares its zero set with `u`, possibly
/// under a different operator.
pub fn frequency_transfer_check(
    u: &ScalarField,
    v: &ScalarField,
    op_u: &CoefficientField,
    op_v: &CoefficientField,
    cfg: &TransferConfig,
) -> Result<TransferReport> {
    let residual_u = residual_norm(u, op_u)?;
    let residual_v = residual_norm(v, op_v)?;
    for (name, r) in [(u.label(), residual_u), (v.label(), residual_v)] {
        if r > cfg.residual_tol {
            return Err(Error::Precondition(format!(
                "field '{name}' fails its residual certificate: {r:e} > {:e}",
                cfg.residual_tol
            )));
        }
    }
    check_equality(u, v, Some(&cfg.region))?;
    let nd_u = doubling_index(u, &cfg.region)?;
    if nd_u > cfg.n0 {
        return Err(Error::Precondition(format!("N_D(u) = {nd_u} exceeds N₀ = {}", cfg.n0)));
    }
    let d_emp = doubling_index(v, &cfg.region)?;
    Ok(TransferReport {
        d_emp,
        nd_u,
        residual_u,
        residual_v,
        pass: d_emp <= cfg.cap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferBatch {
    pub reports: Vec<TransferReport>,
    pub max_d: f64,
    pub pass: bool,
}

/// [`frequency_transfer_check`] over a family of `(v, operator)` pairs.
pub fn frequency_transfer_batch(
    u: &ScalarField,
    op_u: &CoefficientField,
    family: &[(ScalarField, CoefficientField)],
    cfg: &TransferConfig,
) -> Result<TransferBatch> {
    let reports = family
        .iter()
        .map(|(v, op)| frequency_transfer_check(u, v, op_u, op, cfg))
        .collect::<Result<Vec<_>>>()?;
    let max_d = reports.iter().map(|r| r.d_emp).fold(f64::NEG_INFINITY, f64::max);
    Ok(TransferBatch {
        pass: reports.iter().all(|r| r.pass),
        reports,
        max_d,
    })
}

/// Relative residual and `c` spread below which `v = c·u`.
pub const PROPORTIONAL_TOL: f64 = 1e-6;
/// Doubling-index growth across the windows that marks unbounded frequency.
pub const UNBOUNDED_GROWTH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LiouvilleVerdict {
    Proportional,
    FrequencyUnbounded,
    NotProportional,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LiouvilleWindow {
    pub radius: f64,
    /// Least-squares `c` minimizing `‖v − c·u‖` on the defined nodes.
    pub c_fit: f64,
    /// `‖v − c·u‖ / ‖v‖`.
    pub residual: f64,
    pub nd_u: f64,
    pub nd_v: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiouvilleReport {
    pub windows: Vec<LiouvilleWindow>,
    pub c_fit: f64,
    /// `(max c − min c) / |mean c|` over the windows.
    pub c_spread: f64,
    /// Doubling index at the largest window minus that at the smallest.
    pub growth_u: f64,
    pub growth_v: f64,
    pub verdict: LiouvilleVerdict,
}

/// Whether `v` is a multiple of `u` on growing windows about the origin.
pub fn liouville_probe(
    u: &ScalarField,
    v: &ScalarField,
    windows: &[f64],
    residual_tol: f64,
) -> Result<LiouvilleReport> {
    if windows.is_empty() {
        return Err(Error::Precondition("no windows".into()));
    }
    let g = u.grid();
    let mut radii = windows.to_vec();
    radii.sort_by(f64::total_cmp);
    let balls = radii.iter().map(|r| Ball::centered(*r)).collect::<Result<Vec<_>>>()?;
    for b in &balls {
        if !g.contains_ball(b) {
            return Err(Error::DegenerateBall {
                center: b.center,
                radius: b.radius,
                reason: "window leaves the grid box".into(),
            });
        }
    }
    let identity = CoefficientField::identity(g);
    let res = residual_norm(u, &identity)?;
    if res > residual_tol {
        return Err(Error::Precondition(format!(
            "'{}' fails the harmonic residual certificate: {res:e} > {residual_tol:e}",
            u.label()
        )));
    }
    for b in &balls {
        check_equality(u, v, Some(b))?;
    }
    let ratio = ratio_field(v, u)?;
    let mut out = Vec::new();
    for b in &balls {
        let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
        g.for_each_node_in_ball(b, |i, _| {
            if ratio.mask()[i] {
                uv += u.value(i) * v.value(i);
                uu += u.value(i) * u.value(i);
                vv += v.value(i) * v.value(i);
            }
        });
        if uu == 0.0 || vv == 0.0 {
            return Err(Error::EmptyIntersection(format!(
                "no defined nodes in window {}",
                b.radius
            )));
        }
        let c = uv / uu;
        let mut rr = 0.0;
        g.for_each_node_in_ball(b, |i, _| {
            if ratio.mask()[i] {
                let d = v.value(i) - c * u.value(i);
                rr += d * d;
            }
        });
        out.push(LiouvilleWindow {
            radius: b.radius,
            c_fit: c,
            residual: (rr / vv).sqrt(),
            nd_u: doubling_index(u, b)?,
            nd_v: doubling_index(v, b)?,
        });
    }
    let cs: Vec<f64> = out.iter().map(|w| w.c_fit).collect();
    let mean = cs.iter().sum::<f64>() / cs.len() as f64;
    let spread = (cs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - cs.iter().copied().fold(f64::INFINITY, f64::min))
        / mean.abs();
    let growth_u = out.last().unwrap().nd_u - out[0].nd_u;
    let growth_v = out.last().unwrap().nd_v - out[0].nd_v;
    let verdict = if out.iter().all(|w| w.residual <= PROPORTIONAL_TOL) && spread <= PROPORTIONAL_TOL {
        LiouvilleVerdict::Proportional
    } else if growth_u >= UNBOUNDED_GROWTH && growth_v >= UNBOUNDED_GROWTH {
        LiouvilleVerdict::FrequencyUnbounded
    } else {
        LiouvilleVerdict::NotProportional
    };
    Ok(LiouvilleReport {
        c_fit: out[0].c_fit,
        windows: out,
        c_spread: spread,
        growth_u,
        growth_v,
        verdict,
    })
}
