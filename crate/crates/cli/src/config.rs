//! Experiment configuration.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "kind": "model_s",
//!   "params": {"a": 0.5, "b": 0.0, "m": 2.0, "t": 4, "u": 1},
//!   "n_max": 100000,
//!   "snapshots": [1000, 100000],
//!   "replicas": 8,
//!   "master_seed": 42,
//!   "output_dir": "out/canonical",
//!   "checks": ["limit_compare", "tail_fit"]
//! }
//! ```
//!
//! `params` depends on `kind`:
//!
//! * `model_s`: `a`, `b`, `m`, `t`, `u`, optional `n0` (default 1).
//! * `n_interactions`: `N`, `p`, `r`, `q`, `tracked_m`, optional `memory_budget_bytes`.
//! * `analytic_only`: `u`, `a`, `b`, `m`, `s_max`.
//!
//! `n_max` is required unless the kind is `analytic_only`. `snapshots`
//! defaults to `[n_max]`, and `n_max` is always added to the list.
//! `replicas` defaults to 1, `master_seed` to 0 and `output_dir` to `out`.
//! `check_options` overrides the tolerances listed in [`CheckOptions`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scorelaw::graph::GraphParams;
use scorelaw::model_s::SimParams;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    ModelS,
    NInteractions,
    AnalyticOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    LimitCompare,
    TailFit,
    Concentration,
    MassIdentity,
    OracleCompare,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::LimitCompare => "limit_compare",
            Check::TailFit => "tail_fit",
            Check::Concentration => "concentration",
            Check::MassIdentity => "mass_identity",
            Check::OracleCompare => "oracle_compare",
        }
    }

    fn allowed(self, kind: Kind) -> bool {
        match kind {
            Kind::ModelS => self != Check::MassIdentity,
            Kind::NInteractions => self == Check::TailFit,
            Kind::AnalyticOnly => self == Check::MassIdentity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSParams {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub t: u32,
    pub u: u64,
    #[serde(default = "one")]
    pub n0: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphModelParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    #[serde(default)]
    pub tracked_m: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_budget_bytes: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticParams {
    pub u: u64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub s_max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    ModelS(ModelSParams),
    Graph(GraphModelParams),
    Analytic(AnalyticParams),
}

/// Tolerances and ranges used by the checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    /// Relative tolerance of `limit_compare` on scores with `c·n ≥ 1000`.
    pub limit_tolerance: f64,
    /// Largest score compared against the limit law.
    pub limit_s_cut: u64,
    pub fit_w_min: u64,
    /// Half-width of the accepted band around the target exponent.
    pub fit_tolerance: f64,
    /// The two estimators must agree within this many joint standard errors.
    pub fit_agreement: f64,
    pub concentration_s: [u64; 2],
    pub oracle_s_max: u64,
    /// Width of the expectation grid behind `oracle_compare`.
    pub oracle_grid_s_max: u64,
    pub oracle_z: f64,
    pub mass_tolerance: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            limit_tolerance: 0.05,
            limit_s_cut: 1000,
            fit_w_min: 20,
            fit_tolerance: 0.3,
            fit_agreement: 2.0,
            concentration_s: [1, 5],
            oracle_s_max: 8,
            oracle_grid_s_max: 64,
            oracle_z: 4.0,
            mass_tolerance: 2e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub params: Params,
    #[serde(default)]
    pub n_max: u64,
    #[serde(default)]
    pub snapshots: Vec<u64>,
    #[serde(default = "one_usize")]
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub check_options: CheckOptions,
}

fn one() -> u64 {
    1
}

fn one_usize() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates; `params` is decoded according to `kind`.
    pub fn parse(text: &str) -> CliResult<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let kind: Kind = raw
            .get("kind")
            .ok_or_else(|| CliError::Config("missing field `kind`".into()))
            .and_then(|k| {
                serde_json::from_value(k.clone()).map_err(|e| CliError::Config(e.to_string()))
            })?;
        let params = raw.get("params").cloned().unwrap_or(serde_json::Value::Null);
        let typed = match kind {
            Kind::ModelS => serde_json::from_value(params).map(Params::ModelS),
            Kind::NInteractions => serde_json::from_value(params).map(Params::Graph),
            Kind::AnalyticOnly => serde_json::from_value(params).map(Params::Analytic),
        }
        .map_err(|e| CliError::Config(format!("params: {e}")))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_value(raw).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.params = typed;
        cfg.normalize()?;
        Ok(cfg)
    }

    fn normalize(&mut self) -> CliResult<()> {
        if self.replicas == 0 {
            return Err(CliError::Config("replicas must be at least 1".into()));
        }
        if !self.snapshots.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Config("snapshots must be strictly ascending".into()));
        }
        if self.kind != Kind::AnalyticOnly {
            if self.n_max == 0 {
                return Err(CliError::Config("n_max is required for simulations".into()));
            }
            if let Some(&s) = self.snapshots.iter().find(|&&s| s > self.n_max) {
                return Err(CliError::Config(format!("snapshot {s} beyond n_max {}", self.n_max)));
            }
            if self.snapshots.last() != Some(&self.n_max) {
                self.snapshots.push(self.n_max);
            }
        }
        let mut seen = Vec::new();
        for &c in &self.checks {
            if !c.allowed(self.kind) {
                return Err(CliError::Config(format!(
                    "check {} is not available for kind {:?}",
                    c.name(),
                    self.kind
                )));
            }
            if seen.contains(&c) {
                return Err(CliError::Config(format!("check {} listed twice", c.name())));
            }
            seen.push(c);
        }
        Ok(())
    }

    pub fn sim_params(&self, seed: u64) -> Option<SimParams> {
        match &self.params {
            Params::ModelS(p) => {
                let mut s = SimParams::new(p.a, p.b, p.m, p.t, p.u).with_seed(seed);
                s.n0 = p.n0;
                Some(s)
            }
            _ => None,
        }
    }

    pub fn graph_params(&self, seed: u64) -> Option<GraphParams> {
        match &self.params {
            Params::Graph(g) => {
                let mut p = GraphParams::new(g.n, g.p, g.r, g.q, self.n_max)
                    .with_seed(seed)
                    .tracking(&g.tracked_m);
                p.snapshots = self.snapshots.clone();
                p.memory_budget_bytes = g.memory_budget_bytes;
                Some(p)
            }
            _ => None,
        }
    }

    /// The resolved config without `output_dir`, so the same experiment has
    /// the same form wherever it is written.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serialises");
        v.as_object_mut().unwrap().remove("output_dir");
        v
    }

    /// SHA-256 of the compact serialisation of [`Self::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.canonical()).unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL_S: &str = r#"{
        "kind": "model_s",
        "params": {"a": 0.5, "b": 0.0, "m": 2.0, "t": 4, "u": 1},
        "n_max": 1000,
        "snapshots": [10, 100],
        "checks": ["limit_compare"]
    }"#;

    #[test]
    fn parses_and_appends_n_max() {
        let cfg = ExperimentConfig::parse(MODEL_S).unwrap();
        assert_eq!(cfg.snapshots, vec![10, 100, 1000]);
        assert_eq!(cfg.replicas, 1);
        assert!(matches!(cfg.params, Params::ModelS(ModelSParams { n0: 1, .. })));
        assert_eq!(cfg.check_options, CheckOptions::default());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::parse(MODEL_S).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.master_seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn schema_errors() {
        let bad = [
            r#"{"params": {}}"#,
            r#"{"kind": "model_s", "params": {"a": 0.5}}"#,
            r#"{"kind": "model_s", "params": {"a": 0.5, "b": 0, "m": 2, "t": 4, "u": 1, "x": 1}, "n_max": 5}"#,
            r#"{"kind": "model_s", "params": {"a": 0.5, "b": 0, "m": 2, "t": 4, "u": 1}}"#,
            r#"{"kind": "model_s", "params": {"a": 0.5, "b": 0, "m": 2, "t": 4, "u": 1}, "n_max": 5, "snapshots": [3, 2]}"#,
            r#"{"kind": "model_s", "params": {"a": 0.5, "b": 0, "m": 2, "t": 4, "u": 1}, "n_max": 5, "replicas": 0}"#,
            r#"{"kind": "analytic_only", "params": {"u": 1, "a": 0.5, "b": 0, "m": 2, "s_max": 10}, "checks": ["tail_fit"]}"#,
            r#"{"kind": "graph", "params": {}}"#,
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
