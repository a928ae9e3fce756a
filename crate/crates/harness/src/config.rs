//! JSON experiment configurations.

use std::path::{Path, PathBuf};

use gcs_core::gnn::FinalActivation;
use gcs_core::recovery::RecoveryConfig;
use gcs_core::sampling::SamplingModel;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    PhasePortrait(PhaseConfig),
    MeasurementSweep(SweepConfig),
    RipCheck(RipConfig),
    SubspaceRip(SubspaceRipConfig),
}

fn default_unitary() -> String {
    "dct".into()
}

fn default_model() -> SamplingModel {
    SamplingModel::FixedPermutation
}

/// Solver settings; per-trial seeds are derived by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoverySettings {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub restarts: usize,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        let d = RecoveryConfig::default();
        Self {
            learning_rate: d.learning_rate,
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            restarts: d.restarts,
        }
    }
}

impl RecoverySettings {
    pub fn with_seed(&self, seed: u64) -> RecoveryConfig {
        RecoveryConfig {
            learning_rate: self.learning_rate,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            restarts: self.restarts,
            seed,
        }
    }
}

/// Two final layers of equal shape over shared inner layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairSource {
    /// Shared Gaussian inner layers; the low-coherence final layer is Gaussian
    /// and the high-coherence one spans the lowest-frequency rows of the
    /// measurement unitary.
    Synthetic { widths: Vec<usize>, seed: u64 },
    /// Two weight files; inner layers are taken from `high`.
    Files { high: PathBuf, low: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub seed: u64,
    #[serde(default = "default_unitary")]
    pub unitary: String,
    #[serde(default = "default_model")]
    pub model: SamplingModel,
    pub betas: Vec<f64>,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub pair: PairSource,
    #[serde(default)]
    pub recovery: RecoverySettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synth { k_true: usize, count: usize, seed: u64 },
    /// Paths default to the MNIST file names under `GCS_DATA_DIR`.
    Idx {
        #[serde(default)]
        images: Option<PathBuf>,
        #[serde(default)]
        labels: Option<PathBuf>,
        /// Selects the test-split file names when paths are defaulted.
        #[serde(default)]
        test: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub widths: Vec<usize>,
    #[serde(default)]
    pub final_activation: FinalActivation,
    pub regularized: bool,
    #[serde(default = "TrainSpec::default_reg_weight")]
    pub reg_weight: f64,
    #[serde(default = "TrainSpec::default_lambda")]
    pub lambda: f64,
    #[serde(default = "TrainSpec::default_lr")]
    pub learning_rate: f64,
    #[serde(default = "TrainSpec::default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub data: DataSource,
}

impl TrainSpec {
    fn default_reg_weight() -> f64 {
        1e4
    }
    fn default_lambda() -> f64 {
        1.0
    }
    fn default_lr() -> f64 {
        0.001
    }
    fn default_batch() -> usize {
        64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkSource {
    Weights { path: PathBuf },
    Random { widths: Vec<usize>, seed: u64 },
    Train(TrainSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedNetwork {
    pub name: String,
    pub source: NetworkSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSource {
    /// `x0 = G(z0)` with `z0 ~ N(0, I)`.
    Gaussian,
    /// `x0 = G(mu(x))` for a sample `x` of the dataset, `mu` the encoder mean.
    Encoder { data: DataSource },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    #[serde(default = "default_unitary")]
    pub unitary: String,
    #[serde(default = "default_model")]
    pub model: SamplingModel,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub networks: Vec<NamedNetwork>,
    pub targets: TargetSource,
    #[serde(default)]
    pub recovery: RecoverySettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipConfig {
    pub seed: u64,
    #[serde(default = "default_unitary")]
    pub unitary: String,
    #[serde(default = "default_model")]
    pub model: SamplingModel,
    pub network: NetworkSource,
    pub m_list: Vec<usize>,
    pub delta: f64,
    pub chord_samples: usize,
    pub trials: usize,
    /// Absolute constant used to turn the sample-complexity formula into a tail.
    #[serde(default = "RipConfig::default_c")]
    pub complexity_c: f64,
}

impl RipConfig {
    fn default_c() -> f64 {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRipConfig {
    pub seed: u64,
    #[serde(default = "default_unitary")]
    pub unitary: String,
    pub n: usize,
    pub k: usize,
    pub m_list: Vec<usize>,
    pub delta: f64,
    pub trials: usize,
}

fn check_grid<T>(what: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(HarnessError::Config(format!("{what} is empty")));
    }
    Ok(())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(HarnessError::Config("trials must be at least 1".into()));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PhasePortrait(c) => {
                check_grid("betas", &c.betas)?;
                check_grid("m_list", &c.m_list)?;
                check_trials(c.trials)?;
                if c.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
                    return Err(HarnessError::Config("betas must lie in [0, 1]".into()));
                }
            }
            Self::MeasurementSweep(c) => {
                check_grid("m_list", &c.m_list)?;
                check_grid("networks", &c.networks)?;
                check_trials(c.trials)?;
            }
            Self::RipCheck(c) => {
                check_grid("m_list", &c.m_list)?;
                check_trials(c.trials)?;
                if c.chord_samples == 0 {
                    return Err(HarnessError::Config("chord_samples must be at least 1".into()));
                }
            }
            Self::SubspaceRip(c) => {
                check_grid("m_list", &c.m_list)?;
                check_trials(c.trials)?;
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::PhasePortrait(c) => c.seed,
            Self::MeasurementSweep(c) => c.seed,
            Self::RipCheck(c) => c.seed,
            Self::SubspaceRip(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::PhasePortrait(c) => c.seed = seed,
            Self::MeasurementSweep(c) => c.seed = seed,
            Self::RipCheck(c) => c.seed = seed,
            Self::SubspaceRip(c) => c.seed = seed,
        }
    }
}

/// Shipped configurations, keyed by file stem.
pub fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "phase_desk" => include_str!("../configs/phase_desk.json"),
        "phase_paper" => include_str!("../configs/phase_paper.json"),
        "sweep_desk" => include_str!("../configs/sweep_desk.json"),
        "sweep_paper" => include_str!("../configs/sweep_paper.json"),
        "rip_desk" => include_str!("../configs/rip_desk.json"),
        "subspace_rip_desk" => include_str!("../configs/subspace_rip_desk.json"),
        _ => return None,
    })
}

pub fn builtin_config(name: &str) -> Result<ExperimentConfig> {
    let text = builtin(name).ok_or_else(|| HarnessError::Config(format!("no built-in config {name}")))?;
    ExperimentConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse() {
        for name in ["phase_desk", "phase_paper", "sweep_desk", "sweep_paper", "rip_desk", "subspace_rip_desk"] {
            builtin_config(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        let ExperimentConfig::PhasePortrait(p) = builtin_config("phase_paper").unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(p.m_list, (40..=440).step_by(20).collect::<Vec<_>>());
        assert_eq!(p.trials, 20);
        let ExperimentConfig::MeasurementSweep(s) = builtin_config("sweep_paper").unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(s.m_list, vec![10, 15, 20, 25, 50, 100, 200, 250]);
        assert_eq!(s.trials, 10);
    }

    #[test]
    fn validation() {
        let bad = r#"{"experiment":"subspace_rip","seed":1,"n":16,"k":2,"m_list":[],"delta":0.4,"trials":3}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(HarnessError::Config(_))));
        let bad = r#"{"experiment":"subspace_rip","seed":1,"n":16,"k":2,"m_list":[4],"delta":0.4,"trials":0}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let ok = r#"{"experiment":"subspace_rip","seed":1,"n":16,"k":2,"m_list":[4],"delta":0.4,"trials":3}"#;
        let mut c = ExperimentConfig::from_json(ok).unwrap();
        c.set_seed(9);
        assert_eq!(c.seed(), 9);
    }
}
