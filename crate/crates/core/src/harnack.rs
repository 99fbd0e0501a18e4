//! Enlarge step and modified Harnack chains inside a nodal domain.
//!
//! From a point `x` near the zero set, one step moves to the maximizer of
//! `sign(w(x))·w` on the sphere of radius `(1−θ)δ(x)` about `x`. Iterating
//! until the point leaves `B₂` or reaches depth `δ > 1/4` yields a chain along
//! which `|w|` grows geometrically.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{add_scaled, norm, sphere, Ball, Point, ScalarField};
use crate::nodal::{extract_zero_set, ZeroSet};
use crate::util::fit_line;

/// Largest accepted `θ`.
pub const THETA_MAX: f64 = 0.25;
/// Calibration grid for `θ`.
pub const THETA_GRID: [f64; 4] = [0.05, 0.1, 0.15, 0.2];
/// Smallest per-step growth ratio accepted by calibration.
pub const MIN_STEP_RATIO: f64 = 1.05;
/// Depth at which a chain terminates.
pub const TERMINAL_DEPTH: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LeftB2IntoB3,
    DeltaExceedsQuarter,
    LeftBox,
}

/// Result of one enlarge step.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Step {
    pub point: Point,
    pub value: f64,
    /// `|w(x̃)| / |w(x)|`.
    pub ratio: f64,
    /// Index of the winning direction.
    pub direction: usize,
    /// No sample exceeded `|w(x)|` (under-resolution).
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnackChain {
    pub points: Vec<Point>,
    /// `|w(xᵢ)|`.
    pub values: Vec<f64>,
    /// `δ(xᵢ)`.
    pub deltas: Vec<f64>,
    pub theta_used: f64,
    /// `|w(x_{i+1})| / |w(xᵢ)|`.
    pub growth_ratios: Vec<f64>,
    pub termination: Option<Termination>,
    pub terminal_delta: f64,
    pub sign: i8,
    /// Steps where no sphere sample exceeded the current value.
    pub degenerate_steps: Vec<usize>,
}

impl HarnackChain {
    /// Number of steps `m`.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.points.len() <= 1
    }

    pub fn min_ratio(&self) -> f64 {
        self.growth_ratios.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV rows `step,x,y,z,abs_w,delta,ratio` (ratio empty on the first row).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["step", "x", "y", "z", "abs_w", "delta", "ratio"])
            .map_err(io)?;
        for i in 0..self.points.len() {
            let p = self.points[i];
            let ratio = if i == 0 {
                String::new()
            } else {
                self.growth_ratios[i - 1].to_string()
            };
            out.write_record([
                i.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
                self.values[i].to_string(),
                self.deltas[i].to_string(),
                ratio,
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= THETA_MAX) {
        return Err(Error::Precondition(format!("theta {theta} outside (0, {THETA_MAX}]")));
    }
    Ok(())
}

/// One enlarge step from `x`: the argmax of `sign(w(x))·w` over the fixed
/// direction lattice on `∂B_{(1−θ)δ(x)}(x)`; the lowest direction index wins ties.
pub fn enlarge_step(field: &ScalarField, zero_set: &ZeroSet, x: &Point, theta: f64) -> Result<Step> {
    check_theta(theta)?;
    let w = field.eval(x)?;
    if w == 0.0 {
        return Err(Error::Precondition(format!("w vanishes at {x:?}")));
    }
    if norm(x) > 2.0 {
        return Err(Error::Precondition(format!("{x:?} lies outside B₂")));
    }
    let delta = zero_set.distance(x);
    if delta > TERMINAL_DEPTH {
        return Err(Error::Precondition(format!("δ = {delta} exceeds 1/4 at {x:?}")));
    }
    let s = w.signum();
    let radius = (1.0 - theta) * delta;
    let g = field.grid();
    let mut best: Option<(f64, usize, Point)> = None;
    for (k, d) in sphere::enlarge_directions(g.dim()).iter().enumerate() {
        let p = add_scaled(x, radius, d);
        let Ok(v) = field.eval(&p) else { continue };
        if best.is_none_or(|(b, _, _)| s * v > b) {
            best = Some((s * v, k, p));
        }
    }
    let (sv, direction, point) = best.ok_or(Error::OutOfDomain(*x))?;
    Ok(Step {
        point,
        value: s * sv,
        ratio: sv / w.abs(),
        direction,
        degenerate: sv <= w.abs(),
    })
}

/// Default step cap `10·(−log₂ δ(x₀) + 10)`.
pub fn default_step_cap(delta0: f64) -> usize {
    (10.0 * (-delta0.log2() + 10.0)).ceil().max(1.0) as usize
}

/// Chain from `x₀` against an already extracted zero set.
pub fn build_chain_with(field: &ScalarField, zero_set: &ZeroSet, x0: &Point, theta: f64) -> Result<HarnackChain> {
    check_theta(theta)?;
    let w0 = field.eval(x0)?;
    let d0 = zero_set.distance(x0);
    // validates the remaining preconditions at x₀
    let first = enlarge_step(field, zero_set, x0, theta)?;
    let mut chain = HarnackChain {
        points: vec![*x0],
        values: vec![w0.abs()],
        deltas: vec![d0],
        theta_used: theta,
        growth_ratios: Vec::new(),
        termination: None,
        terminal_delta: d0,
        sign: if w0 > 0.0 { 1 } else { -1 },
        degenerate_steps: Vec::new(),
    };
    let cap = default_step_cap(d0);
    let g = field.grid();
    let mut step = first;
    loop {
        let i = chain.growth_ratios.len();
        if step.degenerate {
            chain.degenerate_steps.push(i);
        }
        let p = step.point;
        let d = zero_set.distance(&p);
        chain.points.push(p);
        chain.values.push(step.value.abs());
        chain.deltas.push(d);
        chain.growth_ratios.push(step.ratio);
        chain.terminal_delta = d;
        if norm(&p) > 2.0 {
            chain.termination = Some(Termination::LeftB2IntoB3);
            return Ok(chain);
        }
        if d > TERMINAL_DEPTH {
            chain.termination = Some(Termination::DeltaExceedsQuarter);
            return Ok(chain);
        }
        if chain.len() >= cap {
            return Err(Error::ChainStall { chain: Box::new(chain) });
        }
        step = match enlarge_step(field, zero_set, &p, theta) {
            Ok(s) => s,
            Err(Error::OutOfDomain(_)) => {
                chain.termination = Some(Termination::LeftBox);
                return Ok(chain);
            }
            Err(e) => return Err(e),
        };
        if !g.contains(&step.point) {
            chain.termination = Some(Termination::LeftBox);
            return Ok(chain);
        }
    }
}

/// Zero set used for chains: the part of `Z(w)` within `B_{3.5}`.
pub fn chain_zero_set(field: &ScalarField) -> Result<ZeroSet> {
    extract_zero_set(field, &Ball::centered(3.5)?)
}

/// Chain from `x₀`; extracts the zero set first.
pub fn build_chain(field: &ScalarField, x0: &Point, theta: f64) -> Result<HarnackChain> {
    build_chain_with(field, &chain_zero_set(field)?, x0, theta)
}

/// Chains from many starting points with the length law
/// `m ≈ ξ₁·(−ln δ(x₀)) + ξ₂` and the corkscrew constant `c₄ = min δ(x_m)`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainBatch {
    pub theta: f64,
    pub chains: Vec<HarnackChain>,
    /// `(start index, error message)` for chains that failed.
    pub failures: Vec<(usize, String)>,
    pub xi1: Option<f64>,
    pub xi2: Option<f64>,
    pub r_squared: Option<f64>,
    pub c4: Option<f64>,
    pub min_ratio: Option<f64>,
}

/// Runs chains in parallel; results keep the order of `starts`.
pub fn build_chains(field: &ScalarField, zero_set: &ZeroSet, starts: &[Point], theta: f64) -> Result<ChainBatch> {
    check_theta(theta)?;
    let results: Vec<Result<HarnackChain>> = starts
        .par_iter()
        .map(|x| build_chain_with(field, zero_set, x, theta))
        .collect();
    let mut chains = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => chains.push(c),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let x: Vec<f64> = chains.iter().map(|c| -c.deltas[0].ln()).collect();
    let y: Vec<f64> = chains.iter().map(|c| c.len() as f64).collect();
    let fit = fit_line(&x, &y);
    Ok(ChainBatch {
        theta,
        xi1: fit.map(|f| f.slope),
        xi2: fit.map(|f| f.intercept),
        r_squared: fit.map(|f| f.r_squared),
        c4: chains.iter().map(|c| c.terminal_delta).reduce(f64::min),
        min_ratio: chains.iter().map(|c| c.min_ratio()).reduce(f64::min),
        chains,
        failures,
    })
}

/// Smallest `θ` in [`THETA_GRID`] whose chains all succeed with every
/// per-step ratio above [`MIN_STEP_RATIO`].
pub fn calibrate_theta(field: &ScalarField, zero_set: &ZeroSet, starts: &[Point]) -> Result<ChainBatch> {
    let mut last = None;
    for theta in THETA_GRID {
        let batch = build_chains(field, zero_set, starts, theta)?;
        if batch.failures.is_empty() && batch.min_ratio.is_some_and(|r| r > MIN_STEP_RATIO) {
            return Ok(batch);
        }
        last = Some(batch);
    }
    let b = last.expect("nonempty grid");
    Err(Error::Precondition(format!(
        "no θ in {THETA_GRID:?} gives step ratios above {MIN_STEP_RATIO} (last min ratio {:?}, {} failures)",
        b.min_ratio,
        b.failures.len()
    )))
}
