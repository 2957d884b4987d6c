//! Configuration file handling and flag merging.

use std::path::Path;

use flowguard::evalharness::{ExperimentConfig, PipelineConfig};
use flowguard::flowdata::SchemaMapping;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub n_normal: usize,
    pub n_attack: usize,
    pub informative: usize,
    pub noise: usize,
    /// Fraction of feature cells blanked after generation.
    pub missing_rate: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            n_normal: 1600,
            n_attack: 400,
            informative: 5,
            noise: 14,
            missing_rate: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub eta_values: Vec<f64>,
    pub at_risk_fractions: Vec<f64>,
    pub drift: f64,
    /// Seeds used are `seed, seed + 1, ...`.
    pub repeats: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            eta_values: e.eta_values,
            at_risk_fractions: e.at_risk_fractions,
            drift: e.drift,
            repeats: e.seeds.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VotingSettings {
    pub repeats: usize,
}

impl Default for VotingSettings {
    fn default() -> Self {
        Self { repeats: 1 }
    }
}

/// Contents of a `--config` file. Every section is optional except `version`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub schema: Option<SchemaMapping>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub synth: SynthSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub compare_voting: VotingSettings,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    5
}

impl ConfigFile {
    pub fn defaults() -> Self {
        Self {
            version: CONFIG_VERSION,
            folds: default_folds(),
            ..Default::default()
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(flowguard::Error::from)?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(CONFIG_VERSION) => {}
            Some(v) => {
                return Err(flowguard::Error::Schema(format!(
                    "config version {v} is not supported (expected {CONFIG_VERSION})"
                ))
                .into())
            }
            None => return Err(flowguard::Error::Schema("config needs an integer `version` field".into()).into()),
        }
        Ok(serde_json::from_value(value).map_err(flowguard::Error::from)?)
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::defaults()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| flowguard::Error::io(p, e))?;
                Self::parse(&text)
            }
        }
    }

    pub fn experiment(&self, seed: u64) -> CliResult<ExperimentConfig> {
        Ok(ExperimentConfig {
            eta_values: self.sweep.eta_values.clone(),
            at_risk_fractions: self.sweep.at_risk_fractions.clone(),
            seeds: seed_series(seed, self.sweep.repeats)?,
            drift: self.sweep.drift,
            pipeline: self.pipeline.clone(),
        })
    }
}

pub fn seed_series(seed: u64, repeats: usize) -> CliResult<Vec<u64>> {
    if repeats == 0 {
        return Err(flowguard::Error::Parameter("repeats must be at least 1".into()).into());
    }
    Ok((0..repeats as u64).map(|i| seed.wrapping_add(i)).collect())
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.into())
    }
}
