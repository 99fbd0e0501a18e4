use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{run_check, CheckOutcome};
use super::config::{CompareSpec, GlobalConfig, ScenarioSpec, SuiteConfig};
use super::registry::build_scenario_with;
use super::Params;
use crate::error::{Error, Result};

/// Environment variable for the worker count.
pub const WORKERS_ENV: &str = "NODALAB_WORKERS";

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub id: String,
    pub kind: String,
    pub label: Option<String>,
    pub n0_declared: Option<f64>,
    pub normalization: Option<f64>,
    pub residual_u: Option<f64>,
    pub residual_v: Option<f64>,
    pub residual_family_max: Option<f64>,
    pub error: Option<String>,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioProvenance {
    pub kind: String,
    pub h: Option<f64>,
    pub dim: Option<usize>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
    pub residual_tol: Option<f64>,
    pub params: Params,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub version: String,
    pub global: GlobalConfig,
    pub scenarios: BTreeMap<String, ScenarioProvenance>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CompareOutcome {
    pub label: String,
    pub kind: String,
    pub metric: String,
    pub left: String,
    pub right: String,
    pub left_value: Option<f64>,
    pub right_value: Option<f64>,
    pub threshold: Option<f64>,
    pub mandatory: bool,
    pub pass: bool,
    pub error: Option<String>,
}

/// One row of the scenario × check table.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub check: String,
    pub mandatory: bool,
    pub pass: bool,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub scenarios: Vec<ScenarioReport>,
    pub compares: Vec<CompareOutcome>,
    pub summary: Vec<SummaryRow>,
    /// Every mandatory check and comparison passed.
    pub pass: bool,
}

impl ReportBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// 0 when every mandatory check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    /// Summary as CSV `scenario,check,mandatory,pass,value,error`, comparisons
    /// listed with scenario `compare`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        self.table().write_csv(w)
    }

    /// Fixed-width text table of the summary.
    pub fn render_text(&self) -> String {
        self.table().render_text()
    }

    fn table(&self) -> SummaryTable {
        SummaryTable {
            summary: self.summary.clone(),
            compares: self.compares.clone(),
            pass: self.pass,
        }
    }
}

/// The summary part of a bundle, as read back from its JSON.
#[derive(Clone, Debug, Deserialize)]
pub struct SummaryTable {
    pub summary: Vec<SummaryRow>,
    pub compares: Vec<CompareOutcome>,
    pub pass: bool,
}

impl SummaryTable {
    pub fn from_bundle_json(text: &str) -> Result<SummaryTable> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report bundle: {e}")))
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["scenario", "check", "mandatory", "pass", "value", "error"])
            .map_err(io)?;
        for r in &self.summary {
            out.write_record([
                r.scenario.clone(),
                r.check.clone(),
                r.mandatory.to_string(),
                r.pass.to_string(),
                r.value.map(|v| v.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        for c in &self.compares {
            let value = match (c.left_value, c.right_value) {
                (Some(l), Some(r)) if c.kind == "ratio_at_least" => (r / l).to_string(),
                _ => String::new(),
            };
            out.write_record([
                "compare".to_string(),
                c.label.clone(),
                c.mandatory.to_string(),
                c.pass.to_string(),
                value,
                c.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let w = self.summary.iter().map(|r| r.scenario.len()).max().unwrap_or(8).max(8);
        let wc = self.summary.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        s.push_str(&format!(
            "{:<w$}  {:<wc$}  {:<4}  {}\n",
            "scenario", "check", "pass", "value"
        ));
        for r in &self.summary {
            let v = match (&r.error, r.value) {
                (Some(e), _) => format!("error: {e}"),
                (None, Some(v)) => format!("{v:.6}"),
                (None, None) => "-".into(),
            };
            let mark = if r.pass {
                "yes"
            } else if r.mandatory {
                "NO"
            } else {
                "no*"
            };
            s.push_str(&format!("{:<w$}  {:<wc$}  {:<4}  {}\n", r.scenario, r.check, mark, v));
        }
        for c in &self.compares {
            let v = match (c.left_value, c.right_value) {
                (Some(l), Some(r)) => format!("{l:.6} -> {r:.6}"),
                _ => c.error.clone().unwrap_or_default(),
            };
            s.push_str(&format!(
                "compare {}  {}  {}\n",
                c.label,
                if c.pass { "yes" } else { "NO" },
                v
            ));
        }
        s.push_str(if self.pass {
            "all mandatory checks passed\n"
        } else {
            "some mandatory checks failed\n"
        });
        s
    }
}

/// Loads and runs a suite. Configuration errors are `Error::Config`.
pub fn run_suite(config_path: impl AsRef<Path>) -> Result<ReportBundle> {
    let cfg = SuiteConfig::load(config_path)?;
    run_suite_config(&cfg)
}

/// Worker count from the environment, else the configuration.
fn workers(cfg: &SuiteConfig) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got '{s}'"
            ))),
        },
        Err(_) => Ok(cfg.global.workers),
    }
}

pub fn run_suite_config(cfg: &SuiteConfig) -> Result<ReportBundle> {
    let n = workers(cfg)?;
    run_suite_with_workers(cfg, n)
}

/// Runs the suite on a pool of `workers` threads (default: rayon's choice).
/// The bundle does not depend on the worker count.
pub fn run_suite_with_workers(cfg: &SuiteConfig, workers: Option<usize>) -> Result<ReportBundle> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(ScenarioReport, ScenarioProvenance)> =
        pool.install(|| cfg.scenario.par_iter().map(|s| run_scenario(cfg, s)).collect());
    let mut scenarios = Vec::with_capacity(results.len());
    let mut prov = BTreeMap::new();
    for (r, p) in results {
        prov.insert(r.id.clone(), p);
        scenarios.push(r);
    }
    let compares: Vec<CompareOutcome> = cfg.compare.iter().map(|c| compare(c, &scenarios)).collect();
    let mut summary = Vec::new();
    for s in &scenarios {
        if s.checks.is_empty() {
            if let Some(e) = &s.error {
                summary.push(SummaryRow {
                    scenario: s.id.clone(),
                    check: "build".into(),
                    mandatory: false,
                    pass: false,
                    value: None,
                    error: Some(e.clone()),
                });
            }
        }
        for c in &s.checks {
            summary.push(SummaryRow {
                scenario: s.id.clone(),
                check: c.label.clone(),
                mandatory: c.mandatory,
                pass: c.pass,
                value: c.value,
                error: c.error.clone(),
            });
        }
    }
    let pass = summary.iter().all(|r| r.pass || !r.mandatory) && compares.iter().all(|c| c.pass || !c.mandatory);
    Ok(ReportBundle {
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            global: cfg.global.clone(),
            scenarios: prov,
        },
        scenarios,
        compares,
        summary,
        pass,
    })
}

fn run_scenario(cfg: &SuiteConfig, spec: &ScenarioSpec) -> (ScenarioReport, ScenarioProvenance) {
    let params = cfg.resolved_params(spec);
    let built = build_scenario_with(&spec.kind, &params, None);
    let mut report = ScenarioReport {
        id: spec.id.clone(),
        kind: spec.kind.clone(),
        label: None,
        n0_declared: None,
        normalization: None,
        residual_u: None,
        residual_v: None,
        residual_family_max: None,
        error: None,
        checks: Vec::new(),
    };
    let mut prov = ScenarioProvenance {
        kind: spec.kind.clone(),
        h: None,
        dim: None,
        nodes: None,
        seed: None,
        residual_tol: None,
        params: params.clone(),
    };
    match built {
        Err(e) => {
            report.error = Some(e.to_string());
            report.checks = spec.check.iter().map(|c| CheckOutcome::failed(c, &e)).collect();
        }
        Ok(sc) => {
            report.label = Some(sc.label.clone());
            report.n0_declared = sc.n0_declared;
            report.normalization = Some(sc.normalization);
            report.residual_u = Some(sc.residual_u);
            report.residual_v = sc.residual_v;
            report.residual_family_max = sc.residual_family.iter().copied().reduce(f64::max);
            prov.h = Some(sc.h());
            prov.dim = Some(sc.dim());
            prov.nodes = Some(sc.grid.node_count());
            prov.seed = Some(sc.seed);
            prov.residual_tol = Some(sc.residual_tol);
            prov.params = sc.params.clone();
            let rebuild = |h: f64| build_scenario_with(&spec.kind, &params, Some(h));
            report.checks = spec.check.iter().map(|c| run_check(&sc, c, &rebuild)).collect();
        }
    }
    (report, prov)
}

fn lookup(scenarios: &[ScenarioReport], id: &str, metric: &str) -> std::result::Result<f64, String> {
    let (label, name) = metric.split_once('.').ok_or_else(|| format!("bad metric '{metric}'"))?;
    let s = scenarios
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| format!("no scenario '{id}'"))?;
    let c = s
        .checks
        .iter()
        .find(|c| c.label == label)
        .ok_or_else(|| format!("scenario '{id}' has no check '{label}'"))?;
    if let Some(e) = &c.error {
        return Err(format!("check '{label}' of '{id}' failed: {e}"));
    }
    c.metrics
        .get(name)
        .copied()
        .ok_or_else(|| format!("check '{label}' of '{id}' has no metric '{name}'"))
}

fn compare(c: &CompareSpec, scenarios: &[ScenarioReport]) -> CompareOutcome {
    let l = lookup(scenarios, &c.left, &c.metric);
    let r = lookup(scenarios, &c.right, &c.metric);
    let (pass, error) = match (&l, &r) {
        (Ok(a), Ok(b)) => match c.kind.as_str() {
            "ratio_at_least" => (b / a >= c.threshold.unwrap_or(f64::INFINITY), None),
            _ => (*a == 1.0 && *b == 0.0, None),
        },
        (Err(e), _) | (_, Err(e)) => (false, Some(e.clone())),
    };
    CompareOutcome {
        label: c.label(),
        kind: c.kind.clone(),
        metric: c.metric.clone(),
        left: c.left.clone(),
        right: c.right.clone(),
        left_value: l.ok(),
        right_value: r.ok(),
        threshold: c.threshold,
        mandatory: c.mandatory,
        pass,
        error,
    }
}
