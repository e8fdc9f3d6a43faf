//! JSON experiment configuration (schema version 1).

use std::path::Path;

use serde::{Deserialize, Serialize};

use rwrs_core::exceedance::ExceedanceBox;
use rwrs_core::poisson_tests::{default_boxes, ExperimentConfig};
use rwrs_core::scenery::SceneryFamily;
use rwrs_core::simkit::{McEstimate, DEFAULT_CI};
use rwrs_core::stable_walk::{StepFamily, StepLaw};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub master_seed: u64,
    pub law: StepFamily,
    pub scenery: SceneryFamily,
    pub n: u64,
    pub reps: u64,
    #[serde(default = "default_boxes")]
    pub boxes: Vec<ExceedanceBox>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    pub q_hat: QSource,
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsPlan>,
}

fn default_levels() -> Vec<f64> {
    vec![1.0]
}

/// Where q̂ comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QSource {
    Fixed { mean: f64, stderr: f64 },
    /// Return-based estimate; the truncation bias is folded into the stderr.
    Estimate { horizon: u64, reps: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsPlan {
    pub n_grid: Vec<u64>,
    pub reps: u64,
    /// Level x; τ = ν(x, ∞).
    #[serde(default = "one")]
    pub x: f64,
    #[serde(default = "default_ladder")]
    pub k_ladder: Vec<usize>,
    /// Frozen bound on D^(k_max) / D^(1).
    #[serde(default = "default_dk_ratio")]
    pub dk_ratio_threshold: f64,
    #[serde(default = "one")]
    pub epsilon_c: f64,
    #[serde(default)]
    pub mixing: MixingPlan,
    /// Inner scenery draws where no closed form exists.
    #[serde(default = "default_inner")]
    pub inner_reps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingPlan {
    /// Gap ℓ; defaults to ℓ_n of each grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u64>,
    #[serde(default = "default_max_p")]
    pub max_p: usize,
    #[serde(default = "default_mixing_reps")]
    pub reps: u64,
}

impl Default for MixingPlan {
    fn default() -> Self {
        Self {
            ell: None,
            max_p: default_max_p(),
            reps: default_mixing_reps(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_ladder() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}
fn default_dk_ratio() -> f64 {
    0.2
}
fn default_inner() -> u64 {
    200
}
fn default_max_p() -> usize {
    3
}
fn default_mixing_reps() -> u64 {
    2000
}

impl RunConfig {
    pub fn step_law(&self) -> Result<StepLaw, CliError> {
        Ok(StepLaw::from_family(self.law.clone())?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.step_law()?;
        self.scenery.validate()?;
        if let QSource::Fixed { mean, stderr } = self.q_hat {
            if !(mean > 0.0 && mean <= 1.0) || !(stderr >= 0.0) {
                return Err(CliError::Config("q_hat.fixed must have mean in (0,1] and stderr ≥ 0".into()));
            }
        }
        if let Some(d) = &self.diagnostics {
            if d.n_grid.is_empty() || d.n_grid.iter().any(|&n| n < 8) {
                return Err(CliError::Config("diagnostics.n_grid needs entries ≥ 8".into()));
            }
            if d.reps < 2 {
                return Err(CliError::Config("diagnostics.reps must be ≥ 2".into()));
            }
        }
        // Remaining checks need q̂ only for m_n; use the upper end.
        self.experiment(McEstimate::exact(1.0))?.validate()?;
        Ok(())
    }

    /// Runtime form with a resolved q̂.
    pub fn experiment(&self, q_hat: McEstimate) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig {
            law: self.step_law()?,
            scenery: self.scenery.clone(),
            n: self.n,
            reps: self.reps,
            boxes: self.boxes.clone(),
            levels: self.levels.clone(),
            q_hat,
            master_seed: self.master_seed,
            negative_control: self.negative_control,
        })
    }

    pub fn fixed_q(&self) -> Option<McEstimate> {
        match self.q_hat {
            QSource::Fixed { mean, stderr } => Some(McEstimate {
                mean,
                stderr,
                replications: 0,
                ci_level: DEFAULT_CI,
            }),
            QSource::Estimate { .. } => None,
        }
    }
}

fn describe(e: &serde_json::Error) -> String {
    format!("{e}")
}

/// Reads a config file, or the config embedded in a run manifest.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(describe(&e)))?;
    if let Some(embedded) = value.get("manifest_version").and(value.get("config")) {
        return serde_path_to_error::deserialize(embedded.clone())
            .map_err(|e| CliError::Config(format!("manifest config at `{}`: {}", e.path(), e.inner())));
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config(format!("field `{}`: {}", e.path(), e.inner())))
}
