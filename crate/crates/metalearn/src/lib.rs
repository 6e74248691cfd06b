//! MAML and first-order MAML meta-training, the plain CNN baseline and
//! episodic evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod eval;
mod log;
mod maml;
mod optim;
mod train;

pub use config::{MetaConfig, OuterOptimizer};
pub use error::{MetaError, Result};
pub use eval::{evaluate, evaluate_with, EvalResult};
pub use log::{Algorithm, EpochRecord, TrainLog};
pub use maml::{inner_adapt, meta_gradient, Adapted, InnerConfig, MetaGradient, Tape};
pub use optim::Optimizer;
pub use train::{
    architecture, cnn_train, cnn_train_from, episode_batches, init_model, meta_train, meta_train_from, Model,
};
