use crate::config::OuterOptimizer;

const ADAM_BETA1: f64 = 0.9;
const ADAM_EPS: f64 = 1e-8;

/// State of the outer update rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OuterOptimizer,
    lr: f64,
    beta: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OuterOptimizer, lr: f64, beta: f64, len: usize) -> Self {
        let v = if kind == OuterOptimizer::Adam { vec![0.0; len] } else { Vec::new() };
        Self { kind, lr, beta, m: vec![0.0; len], v, t: 0 }
    }

    /// Applies one update of `params` along `-grad`.
    pub fn step(&mut self, params: &mut [f32], grad: &[f64]) {
        self.t += 1;
        match self.kind {
            OuterOptimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= (self.lr * g) as f32;
                }
            }
            OuterOptimizer::Momentum => {
                // bias-corrected exponential average of the gradient
                let c = 1.0 - self.beta.powi(self.t);
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = self.beta * *m + (1.0 - self.beta) * g;
                    *p -= (self.lr * *m / c) as f32;
                }
            }
            OuterOptimizer::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.t);
                let c2 = 1.0 - self.beta.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = self.beta * *v + (1.0 - self.beta) * g * g;
                    *p -= (self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS)) as f32;
                }
            }
        }
    }
}
