use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::MetaConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Maml,
    Fomaml,
    Cnn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Maml => "maml",
            Algorithm::Fomaml => "fomaml",
            Algorithm::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean query loss after adaptation (mean batch loss for the CNN).
    pub loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Per-epoch training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub algorithm: Algorithm,
    pub config: MetaConfig,
    pub rows: Vec<EpochRecord>,
    pub grad_calls: u64,
    pub hvp_calls: u64,
}

#[derive(Serialize)]
struct Header<'a> {
    algorithm: Algorithm,
    config: &'a MetaConfig,
}

impl TrainLog {
    pub fn new(algorithm: Algorithm, config: MetaConfig) -> Self {
        Self { algorithm, config, rows: Vec::new(), grad_calls: 0, hvp_calls: 0 }
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.seconds).sum()
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.total_seconds() / self.rows.len() as f64
        }
    }

    /// CSV with a `#`-prefixed JSON echo of the configuration on the first
    /// line, then `epoch,loss,accuracy,seconds`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::to_string(&Header { algorithm: self.algorithm, config: &self.config })
            .map_err(std::io::Error::other)?;
        writeln!(w, "# {header}")?;
        writeln!(w, "epoch,loss,accuracy,seconds")?;
        for r in &self.rows {
            writeln!(w, "{},{:.6},{:.6},{:.3}", r.epoch, r.loss, r.accuracy, r.seconds)?;
        }
        Ok(())
    }
}
