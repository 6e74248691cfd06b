//! Inner adaptation and the outer (meta) gradient.

use threedpm_nnet::{Batch, Objective, Scalar};

use crate::error::{MetaError, Result};

/// Settings of the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub lr: f64,
    pub steps: usize,
    pub clip: f64,
}

/// Iterates and clip factors of each inner step, kept for the backward
/// pass through the adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<T> {
    /// Parameters before step `j`.
    pub iterates: Vec<Vec<T>>,
    /// Factor `min(1, clip/‖g_j‖)` applied to step `j`.
    pub scales: Vec<T>,
    pub support_losses: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adapted<T> {
    pub params: Vec<T>,
    pub tape: Tape<T>,
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn clip_scale(norm: f64, clip: f64) -> f64 {
    if norm > clip {
        clip / norm
    } else {
        1.0
    }
}

fn check_finite<T: Scalar>(stage: &'static str, loss: T, grad: &[T]) -> Result<()> {
    if !loss.is_finite() {
        return Err(MetaError::NonFinite { stage, detail: format!("loss {loss:?}") });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(MetaError::NonFinite { stage, detail: format!("gradient entry {i} is {:?}", grad[i]) });
    }
    Ok(())
}

/// `steps` clipped SGD steps on the support loss, starting from `params`.
pub fn inner_adapt<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    params: &[T],
    support: &Batch<T>,
    cfg: &InnerConfig,
) -> Result<Adapted<T>> {
    let mut q = params.to_vec();
    let mut tape = Tape { iterates: Vec::new(), scales: Vec::new(), support_losses: Vec::new() };
    for step in 0..cfg.steps {
        let (loss, g, _) = obj.loss_grad(&q, support)?;
        check_finite("inner adaptation", loss, &g).map_err(|e| match e {
            MetaError::NonFinite { stage, detail } => {
                MetaError::NonFinite { stage, detail: format!("step {step}: {detail}") }
            }
            other => other,
        })?;
        let s = T::lit(clip_scale(norm(&g), cfg.clip));
        let lr = T::lit(cfg.lr) * s;
        tape.iterates.push(q.clone());
        tape.scales.push(s);
        tape.support_losses.push(loss);
        for (p, &gi) in q.iter_mut().zip(&g) {
            *p = *p - lr * gi;
        }
    }
    Ok(Adapted { params: q, tape })
}

/// Outer gradient of one task together with the adapted query statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaGradient<T> {
    pub grad: Vec<T>,
    pub query_loss: T,
    pub query_correct: usize,
    pub query_len: usize,
}

/// Gradient of the query loss at the adapted parameters with respect to
/// the initial ones.
///
/// The second-order form back-propagates through the tape,
/// `v ← v − α·s_j·H(q_j)·v` from the last step to the first. Clip
/// factors are held constant in that recursion. The first-order form
/// returns the query gradient unchanged.
pub fn meta_gradient<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    params: &[T],
    support: &Batch<T>,
    query: &Batch<T>,
    inner: &InnerConfig,
    first_order: bool,
) -> Result<MetaGradient<T>> {
    let adapted = inner_adapt(obj, params, support, inner)?;
    let (query_loss, mut v, preds) = obj.loss_grad(&adapted.params, query)?;
    check_finite("query evaluation", query_loss, &v)?;
    if !first_order && inner.lr != 0.0 {
        for j in (0..inner.steps).rev() {
            let hv = obj.hvp(&adapted.tape.iterates[j], support, &v)?;
            let a = T::lit(inner.lr) * adapted.tape.scales[j];
            for (vi, &h) in v.iter_mut().zip(&hv) {
                *vi = *vi - a * h;
            }
        }
        check_finite("meta-gradient", query_loss, &v)?;
    }
    let query_correct = preds.iter().zip(&query.y).filter(|(p, y)| p == y).count();
    Ok(MetaGradient { grad: v, query_loss, query_correct, query_len: query.len() })
}
