//! Experiment configuration files (TOML).
//!
//! ```toml
//! cells = 5
//! family = "poisson"          # or "finite"
//! lambda_f = 2.0              # poisson only
//! lambda_g = 0.001
//! # pmf_f = [0.5, 0.5]        # finite only
//! # pmf_g = [0.9, 0.1]
//! theta_grid = [50.0, 100.0, 150.0]
//! s_ratio = 10.0
//! trials_per_hypothesis = 1000
//! master_seed = 42
//! # priors = [0.2, 0.2, 0.2, 0.2, 0.2]   default: uniform
//! # max_steps_factor = 20.0              default: 20
//!
//! [[policy]]
//! kind = "dbs"
//! [[policy]]
//! kind = "sluggish"
//! p = 0.1
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::harness::{ConfigError, ExperimentConfig, DEFAULT_MAX_STEPS_FACTOR};
use crate::model::{ModelError, ObservationModel};
use crate::policy::{PolicyError, PolicyKind};

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: invalid `{key}`: {message}")]
    Invalid {
        path: PathBuf,
        key: String,
        message: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    cells: usize,
    family: Family,
    lambda_f: Option<f64>,
    lambda_g: Option<f64>,
    pmf_f: Option<Vec<f64>>,
    pmf_g: Option<Vec<f64>>,
    theta_grid: Vec<f64>,
    #[serde(default)]
    s_ratio: f64,
    trials_per_hypothesis: usize,
    #[serde(default)]
    master_seed: u64,
    priors: Option<Vec<f64>>,
    max_steps_factor: Option<f64>,
    policy: Vec<RawPolicy>,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Family {
    Poisson,
    Finite,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    p: Option<f64>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path)
}

/// Parses configuration text; `origin` only labels diagnostics.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<ExperimentConfig, ConfigFileError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigFileError::Parse {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let invalid = |key: &str, message: String| ConfigFileError::Invalid {
        path: origin.to_path_buf(),
        key: key.to_string(),
        message,
    };

    let model = match raw.family {
        Family::Poisson => {
            if raw.pmf_f.is_some() || raw.pmf_g.is_some() {
                return Err(invalid(
                    "pmf_f",
                    "only allowed with family = \"finite\"".into(),
                ));
            }
            let lambda_f = raw
                .lambda_f
                .ok_or_else(|| invalid("lambda_f", "missing".into()))?;
            let lambda_g = raw
                .lambda_g
                .ok_or_else(|| invalid("lambda_g", "missing".into()))?;
            ObservationModel::poisson(lambda_f, lambda_g)
        }
        Family::Finite => {
            if raw.lambda_f.is_some() || raw.lambda_g.is_some() {
                return Err(invalid(
                    "lambda_f",
                    "only allowed with family = \"poisson\"".into(),
                ));
            }
            let pmf_f = raw
                .pmf_f
                .ok_or_else(|| invalid("pmf_f", "missing".into()))?;
            let pmf_g = raw
                .pmf_g
                .ok_or_else(|| invalid("pmf_g", "missing".into()))?;
            ObservationModel::finite(pmf_f, pmf_g)
        }
    }
    .map_err(|e| {
        let key = match &e {
            ModelError::InvalidRate { name, .. } | ModelError::InvalidPmf { name, .. } => *name,
            ModelError::SupportMismatch { .. } => "pmf_g",
            _ => "family",
        };
        invalid(key, e.to_string())
    })?;

    let mut policies = Vec::with_capacity(raw.policy.len());
    for (i, p) in raw.policy.iter().enumerate() {
        let key = format!("policy[{i}]");
        let mut kind: PolicyKind = p
            .kind
            .parse()
            .map_err(|e: PolicyError| invalid(&format!("{key}.kind"), e.to_string()))?;
        if let Some(prob) = p.p {
            match kind {
                PolicyKind::Sluggish { .. } => {
                    kind = PolicyKind::sluggish(prob)
                        .map_err(|e| invalid(&format!("{key}.p"), e.to_string()))?;
                }
                _ => {
                    return Err(invalid(
                        &format!("{key}.p"),
                        "only the sluggish policy takes a switching probability".into(),
                    ));
                }
            }
        }
        policies.push(kind);
    }

    let cells = raw.cells;
    let config = ExperimentConfig {
        cells,
        model,
        theta_grid: raw.theta_grid,
        s_ratio: raw.s_ratio,
        policies,
        trials_per_hypothesis: raw.trials_per_hypothesis,
        priors: raw
            .priors
            .unwrap_or_else(|| vec![1.0 / cells.max(1) as f64; cells]),
        master_seed: raw.master_seed,
        max_steps_factor: raw.max_steps_factor.unwrap_or(DEFAULT_MAX_STEPS_FACTOR),
    };
    config.validate().map_err(|e| {
        let key = match e {
            ConfigError::TooFewCells(_) => "cells",
            ConfigError::InvalidTheta(_) => "theta_grid",
            ConfigError::InvalidSwitchRatio(_) => "s_ratio",
            ConfigError::ZeroTrials => "trials_per_hypothesis",
            ConfigError::PriorLength { .. }
            | ConfigError::NegativePrior(_)
            | ConfigError::PriorSum(_) => "priors",
            ConfigError::InvalidMaxStepsFactor(_) => "max_steps_factor",
            ConfigError::NoPolicies => "policy",
        };
        invalid(key, e.to_string())
    })?;
    Ok(config)
}
