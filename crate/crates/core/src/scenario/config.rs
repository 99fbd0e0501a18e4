use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checks::CHECK_KINDS;
use super::registry::REGISTRY;
use super::Params;
use crate::error::{Error, Result};

/// Suite-wide defaults; scenario parameters of the same name take precedence.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConfig {
    pub h: Option<f64>,
    pub seed: Option<u64>,
    /// Worker threads; the environment variable overrides it. Results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CheckSpec {
    pub kind: String,
    /// Name used in the summary and in comparisons; defaults to `kind`.
    pub label: Option<String>,
    #[serde(default = "yes")]
    pub mandatory: bool,
    pub expect: Option<f64>,
    pub tol: Option<f64>,
    #[serde(flatten)]
    pub params: Params,
}

impl CheckSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.kind)
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub check: Vec<CheckSpec>,
    #[serde(flatten)]
    pub params: Params,
}

/// Cross-scenario comparison of one metric, addressed as `check_label.metric`.
///
/// Kinds: `ratio_at_least` (right / left ≥ threshold) and `flip` (left is
/// true, right is false, for boolean metrics stored as 1/0).
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub kind: String,
    pub label: Option<String>,
    pub metric: String,
    pub left: String,
    pub right: String,
    pub threshold: Option<f64>,
    #[serde(default = "yes")]
    pub mandatory: bool,
}

impl CompareSpec {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}:{}:{}->{}", self.kind, self.metric, self.left, self.right))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub global: GlobalConfig,
    #[serde(default)]
    pub scenario: Vec<ScenarioSpec>,
    #[serde(default)]
    pub compare: Vec<CompareSpec>,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.is_empty() {
            return Err(Error::Config("no scenarios".into()));
        }
        let mut ids = BTreeSet::new();
        for s in &self.scenario {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate scenario id '{}'", s.id)));
            }
            if !REGISTRY.contains(&s.kind.as_str()) {
                return Err(Error::Config(format!("unknown scenario '{}' (id '{}')", s.kind, s.id)));
            }
            let mut labels = BTreeSet::new();
            for c in &s.check {
                if !CHECK_KINDS.contains(&c.kind.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown check '{}' in scenario '{}'",
                        c.kind, s.id
                    )));
                }
                if !labels.insert(c.label()) {
                    return Err(Error::Config(format!(
                        "duplicate check label '{}' in scenario '{}'",
                        c.label(),
                        s.id
                    )));
                }
            }
        }
        for c in &self.compare {
            for side in [&c.left, &c.right] {
                if !ids.contains(side.as_str()) {
                    return Err(Error::Config(format!("comparison refers to unknown scenario '{side}'")));
                }
            }
            match c.kind.as_str() {
                "ratio_at_least" if c.threshold.is_none() => {
                    return Err(Error::Config("ratio_at_least needs a threshold".into()))
                }
                "ratio_at_least" | "flip" => {}
                k => return Err(Error::Config(format!("unknown comparison kind '{k}'"))),
            }
            if !c.metric.contains('.') {
                return Err(Error::Config(format!(
                    "metric '{}' must read check_label.metric",
                    c.metric
                )));
            }
        }
        Ok(())
    }

    /// Scenario parameters with suite defaults filled in.
    pub fn resolved_params(&self, spec: &ScenarioSpec) -> Params {
        let mut p = spec.params.clone();
        let g = &self.global;
        if let Some(h) = g.h {
            p.entry("h".into()).or_insert(toml::Value::Float(h));
        }
        if let Some(s) = g.seed {
            p.entry("seed".into()).or_insert(toml::Value::Integer(s as i64));
        }
        p
    }
}
