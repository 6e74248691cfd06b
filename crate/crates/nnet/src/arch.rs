//! Network description and the flat parameter vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Result};
use crate::scalar::Scalar;

/// Stack of conv → batch-norm → ReLU → max-pool(2) blocks followed by a
/// linear head and softmax.
///
/// Convolutions are 1-D with odd `kernel` and same-padding. Inputs are
/// affinely rescaled with `(x − input_shift) · input_scale` before the
/// first block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_len: usize,
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub n_way: usize,
    #[serde(default)]
    pub input_shift: f64,
    #[serde(default = "one")]
    pub input_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Batch-norm epsilon.
pub const BN_EPS: f64 = 1e-5;

impl Architecture {
    /// Four 64-filter blocks over 100-sample inputs: lengths
    /// 100 → 50 → 25 → 12 → 6 and a 384-wide head.
    pub fn standard(n_way: usize) -> Self {
        Self { input_len: 100, filters: vec![64; 4], kernel: 3, n_way, input_shift: 0.0, input_scale: 1.0 }
    }

    pub fn with_input_scaling(mut self, shift: f64, scale: f64) -> Self {
        self.input_shift = shift;
        self.input_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(shape(format!("kernel must be odd, got {}", self.kernel)));
        }
        if self.n_way < 1 {
            return Err(shape("n_way must be positive"));
        }
        if self.filters.contains(&0) {
            return Err(shape("every block needs at least one filter"));
        }
        if self.flatten_len() == 0 {
            return Err(shape(format!(
                "input length {} collapses after {} pooling stages",
                self.input_len,
                self.filters.len()
            )));
        }
        if !(self.input_scale.is_finite() && self.input_shift.is_finite()) {
            return Err(shape("input scaling must be finite"));
        }
        Ok(())
    }

    /// Sequence length entering each block, then the final pooled length.
    pub fn lengths(&self) -> Vec<usize> {
        let mut v = vec![self.input_len];
        for _ in &self.filters {
            v.push(v[v.len() - 1] / 2);
        }
        v
    }

    pub fn flatten_len(&self) -> usize {
        let last = self.lengths().last().copied().unwrap_or(0);
        last * self.filters.last().copied().unwrap_or(1)
    }

    pub fn layout(&self) -> ParamLayout {
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, len: usize, fan: (usize, usize), kind: SlotKind| {
            slots.push(LayerSlot { name, offset, len, fan_in: fan.0, fan_out: fan.1, kind });
            offset += len;
        };
        let mut c_in = 1;
        for (i, &o) in self.filters.iter().enumerate() {
            let k = self.kernel;
            push(format!("block{i}.conv.weight"), o * c_in * k, (c_in * k, o * k), SlotKind::Weight);
            push(format!("block{i}.conv.bias"), o, (0, 0), SlotKind::Zero);
            push(format!("block{i}.bn.gamma"), o, (0, 0), SlotKind::One);
            push(format!("block{i}.bn.beta"), o, (0, 0), SlotKind::Zero);
            c_in = o;
        }
        let f = self.flatten_len();
        push("head.weight".into(), self.n_way * f, (f, self.n_way), SlotKind::Weight);
        push("head.bias".into(), self.n_way, (0, 0), SlotKind::Zero);
        ParamLayout { slots, total: offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Weight,
    Zero,
    One,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub kind: SlotKind,
}

/// Where each layer's tensors live inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub slots: Vec<LayerSlot>,
    pub total: usize,
}

impl ParamLayout {
    pub fn slot(&self, name: &str) -> Option<&LayerSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// True when the slots tile `[0, total)` without gaps or overlap.
    pub fn is_exact_cover(&self) -> bool {
        let mut next = 0;
        for s in &self.slots {
            if s.offset != next {
                return false;
            }
            next += s.len;
        }
        next == self.total
    }
}

/// Flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(layout: &ParamLayout) -> Self {
        Self { values: vec![T::zero(); layout.total] }
    }

    /// Glorot-uniform weights, zero biases and shifts, unit BN scales.
    pub fn init(layout: &ParamLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![T::zero(); layout.total];
        for s in &layout.slots {
            let dst = &mut values[s.offset..s.offset + s.len];
            match s.kind {
                SlotKind::Zero => {}
                SlotKind::One => dst.iter_mut().for_each(|v| *v = T::one()),
                SlotKind::Weight => {
                    let limit = (6.0 / (s.fan_in + s.fan_out) as f64).sqrt();
                    for v in dst {
                        *v = T::lit(rng.random_range(-limit..limit));
                    }
                }
            }
        }
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams { values: self.values.iter().map(|v| U::lit(v.to_f64().unwrap_or(f64::NAN))).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shapes() {
        let a = Architecture::standard(6);
        assert_eq!(a.lengths(), vec![100, 50, 25, 12, 6]);
        assert_eq!(a.flatten_len(), 384);
        let l = a.layout();
        assert!(l.is_exact_cover());
        let conv = 64 * 3 + 3 * (64 * 64 * 3 + 64 * 3) + 64 * 3;
        assert_eq!(l.total, conv + 384 * 6 + 6);
    }

    #[test]
    fn collapsing_input_is_rejected() {
        let a = Architecture { input_len: 8, ..Architecture::standard(3) };
        assert!(a.validate().is_err());
        assert!(Architecture::standard(3).validate().is_ok());
    }

    #[test]
    fn init_respects_slot_kinds() {
        let a = Architecture::standard(4);
        let l = a.layout();
        let p: ModelParams<f64> = ModelParams::init(&l, 1);
        let g = l.slot("block2.bn.gamma").unwrap();
        assert!(p.values[g.offset..g.offset + g.len].iter().all(|&v| v == 1.0));
        let b = l.slot("head.bias").unwrap();
        assert!(p.values[b.offset..b.offset + b.len].iter().all(|&v| v == 0.0));
        let w = l.slot("block1.conv.weight").unwrap();
        let limit = (6.0 / (w.fan_in + w.fan_out) as f64).sqrt();
        assert!(p.values[w.offset..w.offset + w.len].iter().all(|v| v.abs() <= limit));
        assert_eq!(p, ModelParams::init(&l, 1));
    }
}
