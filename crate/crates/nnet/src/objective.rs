//! Loss functions seen through their parameter vector, so training loops
//! can run against the network or an analytic toy alike.

use crate::engine::{predict, Network};
use crate::error::{shape, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Inputs `(B, L)` with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub x: Tensor<T>,
    pub y: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(x: Tensor<T>, y: Vec<usize>) -> Result<Self> {
        let (b, _) = x.dims2()?;
        if b != y.len() {
            return Err(shape(format!("{} labels for {b} rows", y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Value, gradient and Hessian-vector product of a scalar loss.
pub trait Objective<T: Scalar>: Sync {
    fn num_params(&self) -> usize;

    /// Loss and predicted class per row.
    fn evaluate(&self, params: &[T], batch: &Batch<T>) -> Result<(T, Vec<usize>)>;

    /// Loss, gradient and predicted class per row.
    fn loss_grad(&self, params: &[T], batch: &Batch<T>) -> Result<(T, Vec<T>, Vec<usize>)>;

    fn hvp(&self, params: &[T], batch: &Batch<T>, v: &[T]) -> Result<Vec<T>>;
}

impl<T: Scalar> Objective<T> for Network {
    fn num_params(&self) -> usize {
        Network::num_params(self)
    }

    fn evaluate(&self, params: &[T], batch: &Batch<T>) -> Result<(T, Vec<usize>)> {
        let probs = self.forward(params, &batch.x)?;
        let loss = crate::engine::cross_entropy(&probs, &batch.y)?;
        Ok((loss, predict(&probs)))
    }

    fn loss_grad(&self, params: &[T], batch: &Batch<T>) -> Result<(T, Vec<T>, Vec<usize>)> {
        let (loss, grad, probs) = Network::loss_grad(self, params, &batch.x, &batch.y)?;
        let preds = predict(&Tensor::new(probs, vec![batch.len(), self.arch().n_way]));
        Ok((loss, grad, preds))
    }

    fn hvp(&self, params: &[T], batch: &Batch<T>, v: &[T]) -> Result<Vec<T>> {
        Network::hvp(self, params, &batch.x, &batch.y, v)
    }
}

/// `½‖q − c‖²`, independent of the batch. Its Hessian is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<T> {
    pub center: Vec<T>,
}

impl<T: Scalar> Quadratic<T> {
    fn check(&self, params: &[T]) -> Result<()> {
        if params.len() != self.center.len() {
            return Err(shape(format!("expected {} parameters, got {}", self.center.len(), params.len())));
        }
        Ok(())
    }
}

impl<T: Scalar> Objective<T> for Quadratic<T> {
    fn num_params(&self) -> usize {
        self.center.len()
    }

    fn evaluate(&self, params: &[T], batch: &Batch<T>) -> Result<(T, Vec<usize>)> {
        self.check(params)?;
        let half = T::lit(0.5);
        let loss = params.iter().zip(&self.center).map(|(&q, &c)| half * (q - c) * (q - c)).sum();
        Ok((loss, vec![0; batch.len()]))
    }

    fn loss_grad(&self, params: &[T], batch: &Batch<T>) -> Result<(T, Vec<T>, Vec<usize>)> {
        let (loss, preds) = self.evaluate(params, batch)?;
        Ok((loss, params.iter().zip(&self.center).map(|(&q, &c)| q - c).collect(), preds))
    }

    fn hvp(&self, params: &[T], _batch: &Batch<T>, v: &[T]) -> Result<Vec<T>> {
        self.check(params)?;
        self.check(v)?;
        Ok(v.to_vec())
    }
}
