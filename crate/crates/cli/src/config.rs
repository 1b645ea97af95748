//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub loss: LossBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub train: TrainBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    pub io: IoBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceBlock>,
    #[serde(default, skip_serializing_if = "HooksBlock::is_empty")]
    pub hooks: HooksBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Diagonal,
    TwoLayerLinear,
    DeepLinear,
    OneHiddenRelu,
    DeepRelu,
    GroupFactored,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: KindName,
    /// Layer output widths `d_1, ..., d_M` for layered kinds.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub widths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    #[default]
    Square,
    Logistic,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBlock {
    pub kind: LossName,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Full,
    Layerwise,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationName {
    #[default]
    Theory,
    Experiment,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub normalization: NormalizationName,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeName>,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self {
            sigma: default_sigma(),
            normalization: NormalizationName::Theory,
            modes: default_modes(),
        }
    }
}

fn default_sigma() -> f64 {
    0.05
}

fn default_modes() -> Vec<ModeName> {
    vec![ModeName::Layerwise, ModeName::Full]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Constant,
    #[default]
    Cosine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSpec {
    #[default]
    Full,
    Minibatch(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub schedule: ScheduleName,
    #[serde(default)]
    pub batch: BatchSpec,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

impl Default for TrainBlock {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            lr: default_lr(),
            schedule: ScheduleName::Cosine,
            batch: BatchSpec::Full,
            log_every: default_log_every(),
        }
    }
}

fn default_steps() -> usize {
    10_000
}

fn default_lr() -> f64 {
    0.1
}

fn default_log_every() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_d1_grid")]
    pub d1_grid: Vec<usize>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_budget")]
    pub optimizer_budget: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            sigma_grid: default_sigma_grid(),
            d1_grid: default_d1_grid(),
            mc_samples: default_mc_samples(),
            optimizer_budget: default_budget(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_sigma_grid() -> Vec<f64> {
    noisereg::oracles::log_spaced(1e-3, 1e-1, 9)
}

fn default_d1_grid() -> Vec<usize> {
    vec![100, 400, 1600, 6400]
}

fn default_mc_samples() -> usize {
    1000
}

fn default_budget() -> usize {
    200_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Targets `β₁ x₁ + β₂ x₂` from the first two coordinates.
    Planted,
    /// Independent standard normal targets.
    Gaussian,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
    #[serde(default = "default_beta")]
    pub beta: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

fn default_outputs() -> usize {
    1
}

fn default_beta() -> [f64; 2] {
    [1.0, -1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceKind {
    Lasso,
    Nuclear,
    Group,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceBlock {
    pub kind: EquivalenceKind,
    #[serde(default = "default_eq_sigma")]
    pub sigma: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Rows of the random end-to-end matrix `M` (nuclear).
    #[serde(default = "default_m_rows")]
    pub m_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_dim: Option<usize>,
    /// Number of equal column groups (group).
    #[serde(default = "default_groups")]
    pub groups: usize,
}

fn default_eq_sigma() -> f64 {
    0.1
}

fn default_restarts() -> usize {
    10
}

fn default_instances() -> usize {
    10
}

fn default_m_rows() -> usize {
    3
}

fn default_groups() -> usize {
    1
}

/// Testing aids. Not meant for experiments.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HooksBlock {
    /// rate-probe: replace every gap series by `σ^p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_rate: Option<f64>,
    /// grad-check: add `delta` to one analytic Jacobian entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt_jacobian: Option<CorruptEntry>,
}

impl HooksBlock {
    fn is_empty(&self) -> bool {
        self.planted_rate.is_none() && self.corrupt_jacobian.is_none()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptEntry {
    pub row: usize,
    pub col: usize,
    pub delta: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Usage(format!(
                "{}: line {}, column {}: {}",
                origin.display(),
                e.line(),
                e.column(),
                strip_position(&e.to_string())
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(format!("config: {m}")));
        if !self.noise.sigma.is_finite() || self.noise.sigma < 0.0 {
            return bad(format!(
                "noise.sigma must be finite and >= 0, got {}",
                self.noise.sigma
            ));
        }
        if self.noise.modes.is_empty() {
            return bad("noise.modes is empty".into());
        }
        if !self.train.lr.is_finite() || self.train.lr < 0.0 {
            return bad(format!(
                "train.lr must be finite and >= 0, got {}",
                self.train.lr
            ));
        }
        if self.train.log_every == 0 {
            return bad("train.log_every must be positive".into());
        }
        if self.sweep.seeds.is_empty() {
            return bad("sweep.seeds is empty".into());
        }
        if let Some(s) = self
            .sweep
            .sigma_grid
            .iter()
            .find(|s| !s.is_finite() || **s <= 0.0)
        {
            return bad(format!(
                "sweep.sigma_grid entries must be positive, got {s}"
            ));
        }
        if self.sweep.d1_grid.contains(&0) {
            return bad("sweep.d1_grid entries must be positive".into());
        }
        match (&self.io.synthetic, &self.io.x_csv) {
            (Some(_), Some(_)) => return bad("io: give either synthetic or x_csv, not both".into()),
            (None, None) => return bad("io: one of synthetic or x_csv is required".into()),
            (None, Some(_)) if self.io.y_csv.is_none() => {
                return bad("io: x_csv needs y_csv".into())
            }
            _ => {}
        }
        let layered = !matches!(
            self.model.kind,
            KindName::Diagonal | KindName::GroupFactored
        );
        if layered && self.model.widths.len() < 2 {
            return bad("model.widths needs at least two layer widths for this kind".into());
        }
        if self.model.kind == KindName::GroupFactored && self.model.groups.unwrap_or(0) == 0 {
            return bad("model.groups must be positive for group_factored".into());
        }
        Ok(())
    }
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}
