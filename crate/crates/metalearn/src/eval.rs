use rayon::prelude::*;
use threedpm::dataset::{sample_episode, RssDataset, SplitSide};
use threedpm::rng::derive_seed;
use threedpm_nnet::{predict, Network};

use crate::config::MetaConfig;
use crate::error::Result;
use crate::maml::{inner_adapt, InnerConfig};
use crate::train::{episode_batches, inner_config, Model};

const EVAL_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub episodes: usize,
    /// Accuracy of each episode, in seed order.
    pub per_episode: Vec<f64>,
}

/// Mean query accuracy over `cfg.eval_episodes` test-side episodes, each
/// fine-tuned from `model` on its K-shot support set.
///
/// Episode `e` is drawn with seed `derive_seed(seed, [3, e])`, so the same
/// `(model, dataset, seed)` always gives the same result.
pub fn evaluate(model: &Model, dataset: &RssDataset, cfg: &MetaConfig, seed: u64) -> Result<EvalResult> {
    let net = Network::new(model.arch.clone())?;
    evaluate_with(&net, &model.params.values, dataset, cfg, seed)
}

pub fn evaluate_with(net: &Network, params: &[f32], dataset: &RssDataset, cfg: &MetaConfig, seed: u64) -> Result<EvalResult> {
    cfg.validate()?;
    let inner = InnerConfig { steps: cfg.eval_steps.unwrap_or(cfg.inner_steps), ..inner_config(cfg) };
    let per_episode: Vec<f64> = (0..cfg.eval_episodes)
        .into_par_iter()
        .map(|e| {
            let s = derive_seed(seed, &[EVAL_STREAM, e as u64]);
            let ep = sample_episode(dataset, SplitSide::Test, cfg.n_way, cfg.k_shot, cfg.eval_query, s)?;
            let (support, query) = episode_batches(dataset, &ep)?;
            let adapted = inner_adapt(net, params, &support, &inner)?;
            let preds = predict(&net.forward(&adapted.params, &query.x)?);
            let hits = preds.iter().zip(&query.y).filter(|(p, y)| p == y).count();
            Ok(hits as f64 / query.len() as f64)
        })
        .collect::<Result<_>>()?;
    let accuracy = if per_episode.is_empty() { 0.0 } else { per_episode.iter().sum::<f64>() / per_episode.len() as f64 };
    Ok(EvalResult { accuracy, episodes: per_episode.len(), per_episode })
}
