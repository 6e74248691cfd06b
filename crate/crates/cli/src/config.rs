//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use threedpm::antenna::AntennaModel;
use threedpm::dataset::{split, DatasetConfig};
use threedpm::estimate::{FadingMode, Steering, SweepAxis};
use threedpm::rng::{derive_seed, Fnv1a};
use threedpm_meta::MetaConfig;

use crate::error::{CliError, Result};

const EVAL_DATA_STREAM: u64 = 0x6576_616c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// SNR grid for `eval`, dB.
    pub snr_db: Vec<f64>,
    /// Instances per bin of each generated evaluation dataset.
    pub instances_per_bin: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { snr_db: vec![10.0], instances_per_bin: 20 }
    }
}

/// Fading during a beam sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFading {
    None,
    #[default]
    Frozen,
    Redrawn,
}

impl SweepFading {
    pub fn mode(self) -> Option<FadingMode> {
        match self {
            SweepFading::None => None,
            SweepFading::Frozen => Some(FadingMode::Frozen),
            SweepFading::Redrawn => Some(FadingMode::Redrawn),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AzimuthSection {
    pub steps: usize,
    /// True elevation of the incident wave, radians.
    pub theta: f64,
    /// True azimuth of the incident wave, radians.
    pub psi: f64,
    /// Elevation the antenna is steered to; the true one when absent.
    pub theta_est: Option<f64>,
    pub axis: SweepAxis,
    pub steering: Steering,
    pub fading: SweepFading,
    /// Kappa of the sweep channel.
    pub kappa: f64,
    pub noise_db: f64,
    /// Independent sweeps to summarize.
    pub trials: usize,
}

impl Default for AzimuthSection {
    fn default() -> Self {
        Self {
            steps: 360,
            theta: 0.05,
            psi: 1.0,
            theta_est: None,
            axis: SweepAxis::Z,
            steering: Steering::Pitch,
            fading: SweepFading::Frozen,
            kappa: 12.0,
            noise_db: 0.0,
            trials: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    /// Receive-antenna tilts at which the conventional estimator probes
    /// the RSS, radians.
    pub probe_offsets: Vec<f64>,
    pub trials: usize,
    pub snr_db: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { probe_offsets: vec![-0.2, -0.1, 0.0, 0.1, 0.2], trials: 1000, snr_db: 10.0 }
    }
}

/// Everything a command needs. The top-level `seed` drives the dataset,
/// training and evaluation streams and overrides `dataset.base_seed` and
/// `meta.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub meta: MetaConfig,
    pub antenna: AntennaModel,
    pub eval: EvalSection,
    pub azimuth: AzimuthSection,
    pub baseline: BaselineSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            dataset: DatasetConfig::default(),
            meta: MetaConfig { epochs: 500, ..MetaConfig::default() },
            antenna: AntennaModel::default(),
            eval: EvalSection::default(),
            azimuth: AzimuthSection::default(),
            baseline: BaselineSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies overrides, propagates the master seed and validates.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        self.dataset.base_seed = self.seed;
        self.meta.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.meta.validate()?;
        self.antenna.validate()?;
        if self.eval.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(CliError::Validation("eval.snr_db must be finite".into()));
        }
        if self.eval.instances_per_bin < self.meta.k_shot + self.meta.eval_query {
            return Err(CliError::Validation(format!(
                "eval.instances_per_bin = {} cannot hold {} support + {} query instances",
                self.eval.instances_per_bin, self.meta.k_shot, self.meta.eval_query
            )));
        }
        if self.azimuth.steps < 2 {
            return Err(CliError::Validation("azimuth.steps must be at least 2".into()));
        }
        if self.azimuth.trials == 0 || self.baseline.trials == 0 {
            return Err(CliError::Validation("trial counts must be positive".into()));
        }
        Ok(())
    }

    /// FNV-1a over the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        let mut h = Fnv1a::default();
        h.update(&json);
        format!("{:016x}", h.finish())
    }

    /// Test-side dataset at a single SNR for evaluation, from its own seed
    /// stream.
    pub fn eval_dataset_config(&self, snr_db: f64) -> DatasetConfig {
        let mut cfg = self.dataset.eval(self.eval.instances_per_bin, snr_db);
        cfg.kappa_list = split(&self.dataset).test_tasks;
        cfg.base_seed = derive_seed(self.seed, &[EVAL_DATA_STREAM]);
        cfg
    }
}
