//! Meta-training (MAML and FOMAML) and the plain CNN baseline.

use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use threedpm::dataset::{sample_episode, split, Episode, RssDataset, SplitSide};
use threedpm::rng::derive_seed;
use threedpm_nnet::{checkpoint, Architecture, Batch, ModelParams, Network, Objective, Tensor};

use crate::config::MetaConfig;
use crate::error::{MetaError, Result};
use crate::log::{Algorithm, EpochRecord, TrainLog};
use crate::maml::{clip_scale, meta_gradient, InnerConfig, MetaGradient};
use crate::optim::Optimizer;

const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

/// Architecture together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub params: ModelParams<f32>,
}

impl Model {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::save(path, &self.arch, &self.params.values)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (arch, values) = checkpoint::load(path)?;
        Ok(Self { arch, params: ModelParams { values } })
    }

    pub fn network(&self) -> Result<Network> {
        Ok(Network::new(self.arch.clone())?)
    }
}

/// Network for `cfg` with inputs standardized by the mean and standard
/// deviation of the training-side features.
pub fn architecture(cfg: &MetaConfig, dataset: &RssDataset) -> Result<Architecture> {
    let dcfg = &dataset.config;
    let train = split(dcfg).train_tasks;
    let per_task = dcfg.angle_bins * dcfg.instances_per_bin;
    let (mut n, mut sum, mut sq) = (0usize, 0.0f64, 0.0f64);
    for (kpos, kappa) in dcfg.kappa_list.iter().enumerate() {
        if !train.contains(kappa) {
            continue;
        }
        let idx = kpos * per_task;
        let block = &dataset.features[idx * dcfg.feature_len..(idx + per_task) * dcfg.feature_len];
        for &v in block {
            let v = f64::from(v);
            sum += v;
            sq += v * v;
        }
        n += block.len();
    }
    if n == 0 {
        return Err(MetaError::Config("dataset has no training tasks (odd kappa)".into()));
    }
    let mean = sum / n as f64;
    let std = (sq / n as f64 - mean * mean).max(0.0).sqrt();
    let arch = Architecture {
        input_len: dcfg.feature_len,
        filters: cfg.filters.clone(),
        kernel: cfg.kernel,
        n_way: cfg.n_way,
        input_shift: 0.0,
        input_scale: 1.0,
    }
    .with_input_scaling(mean, if std > 0.0 { 1.0 / std } else { 1.0 });
    arch.validate()?;
    Ok(arch)
}

/// Freshly initialized model for `cfg`.
pub fn init_model(cfg: &MetaConfig, dataset: &RssDataset) -> Result<Model> {
    cfg.validate()?;
    let arch = architecture(cfg, dataset)?;
    let params = ModelParams::init(&arch.layout(), derive_seed(cfg.seed, &[INIT_STREAM]));
    Ok(Model { arch, params })
}

pub(crate) fn inner_config(cfg: &MetaConfig) -> InnerConfig {
    InnerConfig { lr: cfg.inner_lr, steps: cfg.inner_steps, clip: cfg.clip }
}

/// Support and query batches of an episode.
pub fn episode_batches(dataset: &RssDataset, ep: &Episode) -> Result<(Batch<f32>, Batch<f32>)> {
    let len = dataset.feature_len();
    let make = |idx: &[usize], y: &[usize]| -> Result<Batch<f32>> {
        let x = Tensor::try_new(Episode::gather(dataset, idx), vec![idx.len(), len])?;
        Ok(Batch::new(x, y.to_vec())?)
    };
    Ok((make(&ep.support, &ep.support_labels)?, make(&ep.query, &ep.query_labels)?))
}

fn clip_in_place(g: &mut [f64], clip: f64) {
    let s = clip_scale(g.iter().map(|v| v * v).sum::<f64>().sqrt(), clip);
    if s < 1.0 {
        g.iter_mut().for_each(|v| *v *= s);
    }
}

fn guard(epoch: usize, loss: f64, cfg: &MetaConfig, log: &TrainLog) -> Result<()> {
    if !loss.is_finite() || loss > cfg.divergence_loss {
        return Err(MetaError::Diverged { epoch, loss, log: Box::new(log.clone()) });
    }
    Ok(())
}

/// Episodic meta-training with exact (second-order) or first-order outer gradients,
/// chosen by `cfg.first_order`.
pub fn meta_train(dataset: &RssDataset, cfg: &MetaConfig) -> Result<(Model, TrainLog)> {
    let init = init_model(cfg, dataset)?;
    let net = init.network()?;
    meta_train_from(&net, init, dataset, cfg)
}

/// [`meta_train`] from given initial parameters on an existing network.
pub fn meta_train_from(net: &Network, init: Model, dataset: &RssDataset, cfg: &MetaConfig) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    let algo = if cfg.first_order { Algorithm::Fomaml } else { Algorithm::Maml };
    let mut log = TrainLog::new(algo, cfg.clone());
    let mut model = init;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.outer_lr, cfg.beta, model.params.len());
    let inner = inner_config(cfg);
    let (g0, h0) = (net.grad_calls(), net.hvp_calls());
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let params = &model.params.values;
        let tasks: Vec<MetaGradient<f32>> = (0..cfg.meta_batch)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(cfg.seed, &[TRAIN_STREAM, epoch as u64, t as u64]);
                let ep = sample_episode(dataset, SplitSide::Train, cfg.n_way, cfg.k_shot, cfg.query_per_class(), seed)?;
                let (support, query) = episode_batches(dataset, &ep)?;
                meta_gradient(net, params, &support, &query, &inner, cfg.first_order)
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0f64; params.len()];
        let (mut loss, mut correct, mut total) = (0.0, 0, 0);
        for t in &tasks {
            for (a, &b) in grad.iter_mut().zip(&t.grad) {
                *a += f64::from(b);
            }
            loss += f64::from(t.query_loss);
            correct += t.query_correct;
            total += t.query_len;
        }
        let scale = 1.0 / cfg.meta_batch as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        loss *= scale;
        guard(epoch + 1, loss, cfg, &log)?;
        clip_in_place(&mut grad, cfg.clip);
        opt.step(&mut model.params.values, &grad);
        let row = EpochRecord {
            epoch: epoch + 1,
            loss,
            accuracy: correct as f64 / total as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        debug!("{} epoch {}: loss {:.4} accuracy {:.3}", algo.name(), row.epoch, row.loss, row.accuracy);
        log.rows.push(row);
    }
    log.grad_calls = net.grad_calls() - g0;
    log.hvp_calls = net.hvp_calls() - h0;
    if let Some(last) = log.rows.last() {
        info!("{} finished: loss {:.4} accuracy {:.3}", algo.name(), last.loss, last.accuracy);
    }
    Ok((model, log))
}

/// Plain CNN training: one optimizer step per sampled task on the batch formed by
/// its support and query records, with no inner loop.
pub fn cnn_train(dataset: &RssDataset, cfg: &MetaConfig) -> Result<(Model, TrainLog)> {
    let init = init_model(cfg, dataset)?;
    let net = init.network()?;
    cnn_train_from(&net, init, dataset, cfg)
}

pub fn cnn_train_from(net: &Network, init: Model, dataset: &RssDataset, cfg: &MetaConfig) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    let mut log = TrainLog::new(Algorithm::Cnn, cfg.clone());
    let mut model = init;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.outer_lr, cfg.beta, model.params.len());
    let (g0, h0) = (net.grad_calls(), net.hvp_calls());
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let (mut loss, mut correct, mut total) = (0.0, 0, 0);
        for t in 0..cfg.meta_batch {
            let seed = derive_seed(cfg.seed, &[TRAIN_STREAM, epoch as u64, t as u64]);
            let ep = sample_episode(dataset, SplitSide::Train, cfg.n_way, cfg.k_shot, cfg.query_per_class(), seed)?;
            let idx: Vec<usize> = ep.support.iter().chain(&ep.query).copied().collect();
            let y: Vec<usize> = ep.support_labels.iter().chain(&ep.query_labels).copied().collect();
            let x = Tensor::try_new(Episode::gather(dataset, &idx), vec![idx.len(), dataset.feature_len()])?;
            let batch = Batch::new(x, y)?;
            let (l, g, preds) = Objective::loss_grad(net, &model.params.values, &batch)?;
            loss += f64::from(l);
            correct += preds.iter().zip(&batch.y).filter(|(p, y)| p == y).count();
            total += batch.len();
            let mut g: Vec<f64> = g.iter().map(|&v| f64::from(v)).collect();
            if g.iter().any(|v| !v.is_finite()) {
                return Err(MetaError::Diverged { epoch: epoch + 1, loss: f64::NAN, log: Box::new(log) });
            }
            clip_in_place(&mut g, cfg.clip);
            opt.step(&mut model.params.values, &g);
        }
        loss /= cfg.meta_batch as f64;
        guard(epoch + 1, loss, cfg, &log)?;
        log.rows.push(EpochRecord {
            epoch: epoch + 1,
            loss,
            accuracy: correct as f64 / total as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    log.grad_calls = net.grad_calls() - g0;
    log.hvp_calls = net.hvp_calls() - h0;
    Ok((model, log))
}
