use serde::Serialize;

use super::growth::{growth_envelope, GrowthFit};
use super::quadrature::ball_integral;
use super::{sup_gradient_on_ball, FrequencyProfile};
use crate::error::{Error, Result};
use crate::field::{norm, Ball, CoefficientField, Point, ScalarField};

/// Largest allowed drop of `exp(C₂r)N(r)` between consecutive radii.
pub const MONOTONE_TOLERANCE: f64 = 1e-2;
const C2_STEP: f64 = 0.01;
const C2_STEPS: usize = 100;
/// Sample points per axis for `x ∈ B₁` in the three-sphere fit.
pub const THREE_SPHERE_LATTICE: usize = 9;

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneCertificate {
    pub ok: bool,
    /// Smallest `C₂ ∈ {0, 0.01, …, 1}` making `exp(C₂r)N(r)` nondecreasing.
    pub c2: Option<f64>,
    /// Largest drop of `N` itself (`C₂ = 0`).
    pub violation_at_zero: f64,
    /// Largest drop at the reported `C₂` (or at `C₂ = 1` when none works).
    pub worst_violation: f64,
}

fn drop_of(radii: &[f64], n: &[f64], c2: f64) -> f64 {
    let g: Vec<f64> = radii.iter().zip(n).map(|(r, v)| (c2 * r).exp() * v).collect();
    g.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max)
}

pub(crate) fn monotone(profile: &FrequencyProfile) -> MonotoneCertificate {
    let violation_at_zero = drop_of(&profile.radii, &profile.n_values, 0.0);
    for k in 0..=C2_STEPS {
        let c2 = k as f64 * C2_STEP;
        let v = drop_of(&profile.radii, &profile.n_values, c2);
        if v <= MONOTONE_TOLERANCE {
            return MonotoneCertificate {
                ok: true,
                c2: Some(c2),
                violation_at_zero,
                worst_violation: v,
            };
        }
    }
    MonotoneCertificate {
        ok: false,
        c2: None,
        violation_at_zero,
        worst_violation: drop_of(&profile.radii, &profile.n_values, 1.0),
    }
}

/// `log(H(2R)/H(R))` against `∫_R^{2R} 2N(r)/r dr` and `N(2)`.
#[derive(Clone, Debug, Serialize)]
pub struct DoublingCertificate {
    /// `(R, log(H(2R)/H(R)), ∫_R^{2R} 2N/r dr)` for profile radii `R < 1` with `2R` also sampled.
    pub pairs: Vec<(f64, f64, f64)>,
    /// `max (log ratio − integral)/R`, the fitted `O(1)` term.
    pub c1_fit: Option<f64>,
    pub n_at_2: Option<f64>,
    /// `max log ratio / N(2)`.
    pub c_fit: Option<f64>,
}

fn find_radius(radii: &[f64], r: f64) -> Option<usize> {
    radii.iter().position(|x| (x - r).abs() <= 1e-9 * r.max(1.0))
}

pub(crate) fn doubling(profile: &FrequencyProfile) -> DoublingCertificate {
    let r = &profile.radii;
    let mut pairs = Vec::new();
    for (i, &rr) in r.iter().enumerate() {
        if rr >= 1.0 {
            continue;
        }
        let Some(j) = find_radius(r, 2.0 * rr) else { continue };
        let ratio = (profile.h_values[j] / profile.h_values[i]).ln();
        // trapezoid in log r over the sampled radii in [R, 2R]
        let mut integral = 0.0;
        for k in i..j {
            integral += (profile.n_values[k] + profile.n_values[k + 1]) * (r[k + 1] / r[k]).ln();
        }
        pairs.push((rr, ratio, integral));
    }
    let c1_fit = pairs.iter().map(|(r, l, i)| (l - i) / r).reduce(f64::max);
    let n_at_2 = find_radius(r, 2.0).map(|i| profile.n_values[i]);
    let c_fit = match n_at_2 {
        Some(n) if n > 0.0 => pairs.iter().map(|p| p.1 / n).reduce(f64::max),
        _ => None,
    };
    DoublingCertificate {
        pairs,
        c1_fit,
        n_at_2,
        c_fit,
    }
}

/// Fitted exponents of `∫_{B_{2R}(x)} f ≤ 2^{K N₀} ∫_{B_R(x)} f` for `f = |w|²` and `|∇w|²`.
#[derive(Clone, Debug, Serialize)]
pub struct DoublingConstants {
    pub n0: f64,
    pub k1: f64,
    pub k2: f64,
    pub samples: usize,
}

fn doubling_constants(field: &ScalarField, center: &Point, n0: f64) -> Result<Option<DoublingConstants>> {
    if !(n0 > 0.0) {
        return Ok(None);
    }
    let g = field.grid();
    let dim = g.dim();
    let mut k1: f64 = 0.0;
    let mut k2: f64 = 0.0;
    let mut samples = 0;
    let offsets: Vec<Point> = (0..3usize.pow(dim as u32))
        .map(|idx| {
            let mut x = *center;
            let mut rest = idx;
            for xc in x.iter_mut().take(dim) {
                *xc += (rest % 3) as f64 - 1.0;
                rest /= 3;
            }
            x
        })
        .collect();
    for x in &offsets {
        for r in [0.125, 0.25, 0.5] {
            let outer = Ball {
                center: *x,
                radius: 2.0 * r,
            };
            if !g.contains_ball(&outer) || 2.0 * r < 4.0 * g.spacing() {
                continue;
            }
            let inner = Ball { center: *x, radius: r };
            let w2 = |b: &Ball| ball_integral(field, None, b, |v, _, _, _| v * v);
            let g2 = |b: &Ball| {
                ball_integral(field, None, b, |_, gr, _, _| {
                    gr[0] * gr[0] + gr[1] * gr[1] + gr[2] * gr[2]
                })
            };
            let (wo, wi) = (w2(&outer)?, w2(&inner)?);
            let (go, gi) = (g2(&outer)?, g2(&inner)?);
            if wi > 0.0 {
                k1 = k1.max((wo / wi).log2() / n0);
            }
            if gi > 0.0 {
                k2 = k2.max((go / gi).log2() / n0);
            }
            samples += 1;
        }
    }
    Ok((samples > 0).then_some(DoublingConstants { n0, k1, k2, samples }))
}

/// One three-sphere sample: `a = ln(sup_{B_{1/8}(x)}/sup_{B₂})`, `b = ln(sup_{B₁}/sup_{B₂})`
/// for `|w|`, and the same for `|∇w|`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThreeSpherePoint {
    pub x: Point,
    pub a: f64,
    pub b: f64,
    pub a_grad: f64,
    pub b_grad: f64,
}

/// `sup_{B₁}|w| ≤ K₃ sup_{B_{1/8}(x)}|w|^{α₁} sup_{B₂}|w|^{1−α₁}` and the gradient analogue.
#[derive(Clone, Debug, Serialize)]
pub struct ThreeSphereFit {
    pub k3: f64,
    pub alpha1: f64,
    pub k4: f64,
    pub alpha2: f64,
    pub samples: usize,
}

impl ThreeSpherePoint {
    /// Samples on a `9^n` lattice of `B₁(center)`.
    pub fn sample(field: &ScalarField, center: &Point) -> Result<Vec<ThreeSpherePoint>> {
        let dim = field.grid().dim();
        let ball = |c: Point, r: f64| Ball { center: c, radius: r };
        let s2 = field.sup_norm_on_ball(&ball(*center, 2.0))?;
        let s1 = field.sup_norm_on_ball(&ball(*center, 1.0))?;
        let g2 = sup_gradient_on_ball(field, &ball(*center, 2.0))?;
        let g1 = sup_gradient_on_ball(field, &ball(*center, 1.0))?;
        if s2 == 0.0 || g2 == 0.0 {
            return Err(Error::DegenerateField("field vanishes on B₂".into()));
        }
        let n = THREE_SPHERE_LATTICE;
        let mut out = Vec::new();
        for idx in 0..n.pow(dim as u32) {
            let mut x = *center;
            let mut off = [0.0; 3];
            let mut rest = idx;
            for a in 0..dim {
                off[a] = 2.0 * (rest % n) as f64 / (n - 1) as f64 - 1.0;
                x[a] += off[a];
                rest /= n;
            }
            if norm(&off) > 1.0 + 1e-12 {
                continue;
            }
            let s = field.sup_norm_on_ball(&ball(x, 0.125))?;
            let gs = sup_gradient_on_ball(field, &ball(x, 0.125))?;
            if s == 0.0 || gs == 0.0 {
                continue;
            }
            out.push(ThreeSpherePoint {
                x,
                a: (s / s2).ln(),
                b: (s1 / s2).ln(),
                a_grad: (gs / g2).ln(),
                b_grad: (g1 / g2).ln(),
            });
        }
        Ok(out)
    }
}

fn fit_pair(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let ma = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let vb = pts.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>();
    let va = pts.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>();
    let alpha = if vb > 1e-24 && va > 0.0 {
        pts.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / va
    } else {
        // one field: exact equality at the binding (smallest) a
        let amin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        if amin < 0.0 {
            mb / amin
        } else {
            0.0
        }
    };
    let k = pts
        .iter()
        .map(|p| p.1 - alpha * p.0)
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    (k, alpha)
}

impl ThreeSphereFit {
    /// Fits `α` by least squares of `b` on `a` over the samples (a family of
    /// fields); for a single field, `α = b/min a`. `K` is then the smallest
    /// constant for which the inequality holds at every sample.
    pub fn fit(points: &[ThreeSpherePoint]) -> Result<ThreeSphereFit> {
        if points.is_empty() {
            return Err(Error::TooFewSamples { found: 0, required: 1 });
        }
        let (k3, alpha1) = fit_pair(&points.iter().map(|p| (p.a, p.b)).collect::<Vec<_>>());
        let (k4, alpha2) = fit_pair(&points.iter().map(|p| (p.a_grad, p.b_grad)).collect::<Vec<_>>());
        Ok(ThreeSphereFit {
            k3,
            alpha1,
            k4,
            alpha2,
            samples: points.len(),
        })
    }

    /// Whether both inequalities hold at every sample (relative slack 1e-12).
    pub fn holds(&self, points: &[ThreeSpherePoint]) -> bool {
        points.iter().all(|p| {
            p.b <= self.k3.ln() + self.alpha1 * p.a + 1e-12 && p.b_grad <= self.k4.ln() + self.alpha2 * p.a_grad + 1e-12
        })
    }
}

/// `sup_{B_r}|w|² ≤ c₁ ⨍_{B_{3r/2}}|w|² ≤ c₂ H(2r)` with the smallest fitted constants.
#[derive(Clone, Debug, Serialize)]
pub struct NormEquivalence {
    pub c1: f64,
    pub c2: f64,
    pub radii: Vec<f64>,
}

fn norm_equivalence(field: &ScalarField, profile: &FrequencyProfile) -> Result<Option<NormEquivalence>> {
    let g = field.grid();
    let dim = g.dim() as i32;
    let unit = if dim == 2 {
        std::f64::consts::PI
    } else {
        4.0 / 3.0 * std::f64::consts::PI
    };
    let mut rows = Vec::new();
    for &r in &profile.radii {
        let Some(j) = find_radius(&profile.radii, 2.0 * r) else {
            continue;
        };
        let mid = Ball {
            center: profile.center,
            radius: 1.5 * r,
        };
        if r >= 4.0 || !g.contains_ball(&mid) {
            continue;
        }
        let sup = field.sup_norm_on_ball(&Ball {
            center: profile.center,
            radius: r,
        })?;
        let mean = ball_integral(field, None, &mid, |v, _, _, _| v * v)? / (unit * mid.radius.powi(dim));
        if mean > 0.0 {
            rows.push((r, sup * sup / mean, mean, profile.h_values[j]));
        }
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let c1 = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let c2 = rows.iter().map(|r| c1 * r.2 / r.3).fold(0.0, f64::max);
    Ok(Some(NormEquivalence {
        c1,
        c2,
        radii: rows.iter().map(|r| r.0).collect(),
    }))
}

/// `K₁⁻¹ N(r/2) − K₂ ≤ N_D(r) ≤ K₁ N(2r) + K₂` with `K₂ = 0` and the smallest `K₁`.
#[derive(Clone, Debug, Serialize)]
pub struct Sandwich {
    pub k1: f64,
    pub k2: f64,
    pub radii: Vec<f64>,
    pub holds: bool,
}

pub(crate) fn sandwich(profile: &FrequencyProfile) -> Option<Sandwich> {
    let r = &profile.radii;
    let mut k1: f64 = 1.0;
    let mut used = Vec::new();
    let mut triples = Vec::new();
    for (i, &rr) in r.iter().enumerate() {
        let (Some(lo), Some(hi), Some(nd)) = (find_radius(r, rr / 2.0), find_radius(r, 2.0 * rr), profile.nd_values[i])
        else {
            continue;
        };
        let (nl, nh) = (profile.n_values[lo], profile.n_values[hi]);
        if nd > 0.0 {
            k1 = k1.max(nl / nd);
        }
        if nh > 0.0 {
            k1 = k1.max(nd / nh);
        }
        used.push(rr);
        triples.push((nl, nd, nh));
    }
    if used.is_empty() {
        return None;
    }
    let holds = triples
        .iter()
        .all(|&(nl, nd, nh)| nl / k1 <= nd * (1.0 + 1e-12) && nd <= k1 * nh * (1.0 + 1e-12));
    Some(Sandwich {
        k1,
        k2: 0.0,
        radii: used,
        holds,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub monotone: MonotoneCertificate,
    pub doubling: DoublingCertificate,
    pub doubling_constants: Option<DoublingConstants>,
    pub three_sphere: Option<ThreeSphereFit>,
    pub norm_equiv: Option<NormEquivalence>,
    pub sandwich: Option<Sandwich>,
    pub growth: Option<GrowthFit>,
    pub pass: bool,
}

/// Runs the certificate suite on a profile. The profile must span a factor of
/// at least 16 in radius with three or more radii. Checks whose balls leave
/// the grid box are omitted.
pub fn frequency_checks(
    profile: &FrequencyProfile,
    field: &ScalarField,
    operator: &CoefficientField,
) -> Result<CertificateReport> {
    let r = &profile.radii;
    if r.len() < 3 || r[r.len() - 1] < 16.0 * r[0] * (1.0 - 1e-12) {
        return Err(Error::InsufficientCoverage(format!(
            "radii [{}, {}] ({} values) do not span a factor 16",
            r[0],
            r[r.len() - 1],
            r.len()
        )));
    }
    if operator.grid() != field.grid() {
        return Err(Error::GridMismatch);
    }
    let g = field.grid();
    let c = profile.center;
    let monotone = monotone(profile);
    let doubling = doubling(profile);
    let n0 = profile
        .nd_tilde
        .unwrap_or_else(|| profile.n_values.iter().copied().fold(0.0, f64::max));
    let doubling_constants = doubling_constants(field, &c, n0)?;
    let three_sphere = if g.contains_ball(&Ball { center: c, radius: 2.0 }) {
        let pts = ThreeSpherePoint::sample(field, &c)?;
        if pts.is_empty() {
            None
        } else {
            Some(ThreeSphereFit::fit(&pts)?)
        }
    } else {
        None
    };
    let norm_equiv = norm_equivalence(field, profile)?;
    let sandwich = sandwich(profile);
    let growth = match growth_envelope(field, &Ball { center: c, radius: 2.0 }, n0) {
        Ok(f) => Some(f),
        Err(Error::EmptyZeroSet | Error::TooFewSamples { .. }) => None,
        Err(e) => return Err(e),
    };
    let pass = monotone.ok
        && sandwich.as_ref().is_none_or(|s| s.holds)
        && growth.as_ref().is_none_or(|f| f.lower_ok && f.upper_ok);
    Ok(CertificateReport {
        monotone,
        doubling,
        doubling_constants,
        three_sphere,
        norm_equiv,
        sandwich,
        growth,
        pass,
    })
}
