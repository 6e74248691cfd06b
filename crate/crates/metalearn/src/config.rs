use serde::{Deserialize, Serialize};

use crate::error::{MetaError, Result};

/// Outer-loop update rule. `beta` in [`MetaConfig`] is the decay of the
/// squared-gradient average for Adam and of the gradient average for
/// momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterOptimizer {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    /// Inner (task) learning rate α.
    pub inner_lr: f64,
    pub outer_lr: f64,
    /// Meta step size β.
    pub beta: f64,
    pub inner_steps: usize,
    pub meta_batch: usize,
    pub epochs: usize,
    pub n_way: usize,
    pub k_shot: usize,
    /// Query instances per class in training episodes; 0 means `k_shot`.
    pub train_query: usize,
    /// Query instances per class in evaluation episodes.
    pub eval_query: usize,
    pub eval_episodes: usize,
    /// Fine-tuning steps on the support set before classifying evaluation
    /// queries; `None` uses `inner_steps`, `Some(0)` disables fine-tuning.
    pub eval_steps: Option<usize>,
    pub first_order: bool,
    pub optimizer: OuterOptimizer,
    /// Gradient-norm clip for inner steps and outer updates.
    pub clip: f64,
    /// Training aborts when the mean query loss exceeds this.
    pub divergence_loss: f64,
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            inner_lr: 0.4,
            outer_lr: 0.001,
            beta: 0.999,
            inner_steps: 1,
            meta_batch: 10,
            epochs: 500,
            n_way: 6,
            k_shot: 3,
            train_query: 0,
            eval_query: 15,
            eval_episodes: 200,
            eval_steps: None,
            first_order: false,
            optimizer: OuterOptimizer::Adam,
            clip: 10.0,
            divergence_loss: 1e6,
            filters: vec![64; 4],
            kernel: 3,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MetaError::Config(m.into()));
        if !(self.inner_lr >= 0.0 && self.inner_lr.is_finite()) {
            return bad("inner_lr must be finite and non-negative");
        }
        if !(self.outer_lr > 0.0 && self.outer_lr.is_finite()) {
            return bad("outer_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1)");
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be at least 1");
        }
        if self.meta_batch == 0 {
            return bad("meta_batch must be at least 1");
        }
        if self.n_way == 0 || self.k_shot == 0 {
            return bad("n_way and k_shot must be positive");
        }
        if self.eval_query == 0 {
            return bad("eval_query must be positive");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.filters.is_empty() {
            return bad("at least one convolution block is required");
        }
        Ok(())
    }

    pub fn query_per_class(&self) -> usize {
        if self.train_query == 0 {
            self.k_shot
        } else {
            self.train_query
        }
    }
}
