//! Small 1-D convolutional classifier with exact reverse-mode gradients and
//! Hessian-vector products.

mod arch;
pub mod checkpoint;
mod engine;
mod error;
mod objective;
mod scalar;
mod tensor;

pub use arch::{Architecture, LayerSlot, ModelParams, ParamLayout, SlotKind, BN_EPS};
pub use engine::{cross_entropy, predict, BnStats, Network};
pub use error::{NnetError, Result};
pub use objective::{Batch, Objective, Quadratic};
pub use scalar::Scalar;
pub use tensor::Tensor;
