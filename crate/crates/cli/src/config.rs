//! Run configuration: JSON schema and full-config validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use osassl_core::learners::BaseLearner;
use osassl_core::superlearner::{AlgorithmSpec, PenaltyVariant};
use osassl_core::synthgen::GeneratorSpec;

/// Where the panel comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputConfig {
    /// Generate a synthetic panel (enables the oracle probe).
    Synthetic(GeneratorSpec),
    /// Load a panel from CSV files, optionally enriching it with the
    /// feature pipeline.
    Csv(CsvInput),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvInput {
    pub panel: PathBuf,
    pub schema: PathBuf,
    /// Drought-index enrichment inputs (grid values, overlap areas and the
    /// CDF training window).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swi: Option<SwiInput>,
    /// House-level compound-covariate inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub houses: Option<HousesInput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwiInput {
    pub grid: PathBuf,
    pub overlaps: PathBuf,
    /// Inclusive year window the quarter CDFs are fitted on.
    pub cdf_years: (i32, i32),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HousesInput {
    pub path: PathBuf,
    #[serde(default = "default_quantile_count")]
    pub quantile_count: usize,
}

fn default_quantile_count() -> usize {
    osassl_core::features::DEFAULT_QUANTILE_COUNT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaSettings {
    pub stages: (usize, usize, usize),
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub penalty_variant: PenaltyVariant,
    pub algorithms: Vec<AlgorithmSpec>,
}

fn default_lambda() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceSource {
    #[default]
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceSettings {
    #[serde(default = "default_n_permutations")]
    pub n_permutations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Inclusive year window of pooled predictions; defaults to every
    /// evaluation year.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(i32, i32)>,
    #[serde(default)]
    pub source: ImportanceSource,
}

impl Default for ImportanceSettings {
    fn default() -> Self {
        ImportanceSettings {
            n_permutations: default_n_permutations(),
            seed: default_seed(),
            alpha: default_alpha(),
            window: None,
            source: ImportanceSource::Discrete,
        }
    }
}

fn default_n_permutations() -> usize {
    10_000
}

fn default_seed() -> u64 {
    1
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputConfig,
    pub zoo: Vec<BaseLearner>,
    pub meta: MetaSettings,
    #[serde(default)]
    pub importance: ImportanceSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config `{}`: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("cannot parse config `{}`: {e}", path.display()))
    }

    /// Collects every violation without running anything and without
    /// failing fast.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.input {
            InputConfig::Synthetic(spec) => {
                if let Err(e) = spec.validate() {
                    out.push(format!("input.synthetic: {e}"));
                }
            }
            InputConfig::Csv(csv) => {
                for (label, path) in [("panel", &csv.panel), ("schema", &csv.schema)] {
                    if !path.exists() {
                        out.push(format!(
                            "input.csv.{label}: file `{}` does not exist",
                            path.display()
                        ));
                    }
                }
                if let Some(swi) = &csv.swi {
                    for (label, path) in [("grid", &swi.grid), ("overlaps", &swi.overlaps)] {
                        if !path.exists() {
                            out.push(format!(
                                "input.csv.swi.{label}: file `{}` does not exist",
                                path.display()
                            ));
                        }
                    }
                    if swi.cdf_years.0 > swi.cdf_years.1 {
                        out.push(format!(
                            "input.csv.swi.cdf_years: start {} after end {}",
                            swi.cdf_years.0, swi.cdf_years.1
                        ));
                    }
                }
                if let Some(houses) = &csv.houses {
                    if !houses.path.exists() {
                        out.push(format!(
                            "input.csv.houses.path: file `{}` does not exist",
                            houses.path.display()
                        ));
                    }
                    if houses.quantile_count == 0 {
                        out.push("input.csv.houses.quantile_count: must be >= 1".into());
                    }
                }
            }
        }
        if self.zoo.is_empty() {
            out.push("zoo: must declare at least one learner".into());
        }
        for learner in &self.zoo {
            if let Err(e) = learner.validate() {
                out.push(format!("zoo.{}: {e}", learner.name));
            }
        }
        let (w1, w2, w3) = self.meta.stages;
        if w1 == 0 || w2 == 0 || w3 == 0 {
            out.push("meta.stages: every stage length must be >= 1".into());
        }
        if self.meta.lambda.is_nan() || self.meta.lambda < 0.0 || !self.meta.lambda.is_finite() {
            out.push(format!(
                "meta.lambda: must be nonnegative and finite, got {}",
                self.meta.lambda
            ));
        }
        if self.meta.epsilon.is_nan() || self.meta.epsilon <= 0.0 || self.meta.epsilon > 1.0 {
            out.push(format!(
                "meta.epsilon: must lie in (0, 1], got {}",
                self.meta.epsilon
            ));
        }
        if self.meta.algorithms.len() < 2 {
            out.push("meta.algorithms: continuous selection needs at least 2 algorithms".into());
        }
        for (idx, spec) in self.meta.algorithms.iter().enumerate() {
            match spec {
                AlgorithmSpec::Single { learner } if *learner >= self.zoo.len() => {
                    out.push(format!(
                        "meta.algorithms[{idx}]: zoo index {learner} out of range"
                    ));
                }
                AlgorithmSpec::NetOverLearners { epsilon }
                    if epsilon.is_nan() || *epsilon <= 0.0 || *epsilon > 1.0 =>
                {
                    out.push(format!(
                        "meta.algorithms[{idx}]: epsilon must lie in (0, 1], got {epsilon}"
                    ));
                }
                AlgorithmSpec::RidgeStack { lambda } if lambda.is_nan() || *lambda <= 0.0 => {
                    out.push(format!(
                        "meta.algorithms[{idx}]: ridge_stack lambda must be positive"
                    ));
                }
                _ => {}
            }
        }
        if self.importance.n_permutations == 0 {
            out.push("importance.n_permutations: must be >= 1".into());
        }
        if self.importance.alpha.is_nan()
            || self.importance.alpha <= 0.0
            || self.importance.alpha >= 1.0
        {
            out.push(format!(
                "importance.alpha: must lie in (0, 1), got {}",
                self.importance.alpha
            ));
        }
        if let Some((start, end)) = self.importance.window {
            if start > end {
                out.push(format!("importance.window: start {start} after end {end}"));
            }
        }
        out
    }
}
