//! Scenario registry, suite configuration, check runners and the report bundle.
//!
//! A scenario is a named family of sampled solutions (analytic formulas or
//! Dirichlet solves) with its operator, a declared frequency bound and the
//! domain information the geometric checks need. A suite is a TOML file of
//! scenarios with checks, run in parallel into a deterministic JSON bundle.

mod checks;
mod config;
mod registry;
mod suite;

pub use checks::{run_check, CheckOutcome};
pub use config::{CheckSpec, CompareSpec, GlobalConfig, ScenarioSpec, SuiteConfig};
pub use registry::{build_scenario, build_scenario_with, REGISTRY};
pub use suite::{
    run_suite, run_suite_config, run_suite_with_workers, CompareOutcome, Provenance, ReportBundle, ScenarioReport,
    SummaryRow, SummaryTable, WORKERS_ENV,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{Ball, CoefficientField, GridSpec, Point, ScalarField};

/// Scenario and check parameters as parsed from the configuration.
pub type Params = BTreeMap<String, toml::Value>;

/// Typed access to [`Params`].
pub trait ParamsExt {
    fn f64_or(&self, key: &str, default: f64) -> Result<f64>;
    fn opt_f64(&self, key: &str) -> Result<Option<f64>>;
    fn usize_or(&self, key: &str, default: usize) -> Result<usize>;
    fn bool_or(&self, key: &str, default: bool) -> Result<bool>;
    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str>;
    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>>;
    fn point(&self, key: &str) -> Result<Option<Point>>;
    fn points(&self, key: &str) -> Result<Option<Vec<Point>>>;
}

fn bad(key: &str, want: &str, v: &toml::Value) -> Error {
    Error::Config(format!("parameter '{key}' must be {want}, got {v}"))
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "a number", v)),
    }
}

fn as_point(key: &str, v: &toml::Value) -> Result<Point> {
    let arr = v.as_array().ok_or_else(|| bad(key, "a coordinate array", v))?;
    if arr.is_empty() || arr.len() > 3 {
        return Err(bad(key, "an array of 1 to 3 coordinates", v));
    }
    let mut p = [0.0; 3];
    for (i, c) in arr.iter().enumerate() {
        p[i] = as_f64(key, c)?;
    }
    Ok(p)
}

impl ParamsExt for Params {
    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| as_f64(key, v)).transpose()
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(bad(key, "a nonnegative integer", v)),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(bad(key, "a boolean", v)),
        }
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.get(key) {
            None => Ok(default),
            Some(toml::Value::String(s)) => Ok(s),
            Some(v) => Err(bad(key, "a string", v)),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a.iter().map(|v| as_f64(key, v)).collect::<Result<_>>().map(Some),
            Some(v) => Err(bad(key, "an array of numbers", v)),
        }
    }

    fn point(&self, key: &str) -> Result<Option<Point>> {
        self.get(key).map(|v| as_point(key, v)).transpose()
    }

    fn points(&self, key: &str) -> Result<Option<Vec<Point>>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a.iter().map(|v| as_point(key, v)).collect::<Result<_>>().map(Some),
            Some(v) => Err(bad(key, "an array of points", v)),
        }
    }
}

/// A fully built scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: String,
    /// Kind with its parameters, e.g. `neck(eps=0.001)`.
    pub label: String,
    /// Scenario parameters, including the resolved `h` and `half`.
    pub params: Params,
    pub grid: GridSpec,
    /// Primary field.
    pub u: ScalarField,
    /// Partner field for pair checks.
    pub v: Option<ScalarField>,
    pub op_u: CoefficientField,
    /// Operator of the partner when it differs from `op_u`.
    pub op_v: Option<CoefficientField>,
    /// Family members for family checks; `family[0]` is `u`.
    pub family: Vec<ScalarField>,
    /// Field whose nodal domains the domain checks use (defaults to `u`).
    pub level: Option<ScalarField>,
    /// A point inside the domain of interest.
    pub domain_point: Option<Point>,
    /// Vertical walls `|x| = a` cutting the domain.
    pub slab: Option<f64>,
    /// Closed form of `v/u`, where known.
    pub quotient: Option<fn(&Point) -> f64>,
    /// Declared frequency bound; `None` for unbounded families.
    pub n0_declared: Option<f64>,
    pub seed: u64,
    pub residual_tol: f64,
    /// Residual certificates of `u`, `v` and every family member.
    pub residual_u: f64,
    pub residual_v: Option<f64>,
    pub residual_family: Vec<f64>,
    /// Common factor applied to every field by the normalization.
    pub normalization: f64,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn h(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn op_v(&self) -> &CoefficientField {
        self.op_v.as_ref().unwrap_or(&self.op_u)
    }

    pub fn level(&self) -> &ScalarField {
        self.level.as_ref().unwrap_or(&self.u)
    }

    pub fn partner(&self) -> Result<&ScalarField> {
        self.v
            .as_ref()
            .ok_or_else(|| Error::Config(format!("scenario {} has no partner field", self.label)))
    }

    /// Residual gate: every field's certificate is within `residual_tol`.
    pub fn residual_gate(&self) -> Result<()> {
        let all = std::iter::once(("u", self.residual_u))
            .chain(self.residual_v.map(|r| ("v", r)))
            .chain(self.residual_family.iter().map(|&r| ("family", r)));
        for (name, r) in all {
            if !(r <= self.residual_tol) {
                return Err(Error::Precondition(format!(
                    "{} field '{name}' fails its residual certificate: {r:e} > {:e}",
                    self.label, self.residual_tol
                )));
            }
        }
        Ok(())
    }

    /// Radius of the normalization ball `B_{min(8, R)}` with `R` the largest
    /// centered ball inside the grid.
    pub fn normalization_radius(grid: &GridSpec) -> f64 {
        grid.box_distance(&[0.0; 3]).min(8.0)
    }
}

/// Scales every field by the factor that makes `sup_{B}|u| = 1`; pairs keep
/// their ratio. Idempotent.
pub(crate) fn normalize(sc: &mut Scenario) -> Result<()> {
    let ball = Ball::centered(Scenario::normalization_radius(&sc.grid))?;
    let (u, factor) = sc.u.normalized_on_ball(&ball)?;
    if factor == 1.0 {
        return Ok(());
    }
    sc.u = u;
    if let Some(v) = &sc.v {
        sc.v = Some(v.scaled(factor));
    }
    let mut family = Vec::with_capacity(sc.family.len());
    for (i, f) in sc.family.iter().enumerate() {
        family.push(if i == 0 {
            sc.u.clone()
        } else {
            f.normalized_on_ball(&ball)?.0
        });
    }
    sc.family = family;
    sc.normalization *= factor;
    Ok(())
}

#[cfg(test)]
mod tests;
