use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threedpm_meta::{inner_adapt, meta_gradient, InnerConfig};
use threedpm_nnet::{Architecture, Batch, ModelParams, Network, Objective, Quadratic, Tensor};

fn empty() -> Batch<f64> {
    Batch::new(Tensor::zeros(vec![1, 1]), vec![0]).unwrap()
}

fn inner(lr: f64, steps: usize) -> InnerConfig {
    InnerConfig { lr, steps, clip: 10.0 }
}

#[test]
fn zero_inner_rate_is_identity() {
    let q = Quadratic { center: vec![0.3, -0.2] };
    let a = inner_adapt(&q, &[1.0, 2.0], &empty(), &inner(0.0, 3)).unwrap();
    assert_eq!(a.params, vec![1.0, 2.0]);
}

#[test]
fn quadratic_inner_steps() {
    let q = Quadratic { center: vec![0.0] };
    let one = inner_adapt(&q, &[1.0], &empty(), &inner(0.5, 1)).unwrap();
    assert_eq!(one.params, vec![0.5]);
    let three = inner_adapt(&q, &[1.0], &empty(), &inner(0.4, 3)).unwrap();
    assert!((three.params[0] - 0.6f64.powi(3)).abs() < 1e-15);
}

#[test]
fn quadratic_meta_gradients() {
    let q = Quadratic { center: vec![0.0] };
    let b = empty();
    let maml = meta_gradient(&q, &[1.0], &b, &b, &inner(0.5, 1), false).unwrap();
    let fo = meta_gradient(&q, &[1.0], &b, &b, &inner(0.5, 1), true).unwrap();
    assert_eq!(maml.grad, vec![0.25]);
    assert_eq!(fo.grad, vec![0.5]);
}

#[test]
fn quadratic_maml_is_contracted_query_gradient() {
    // query gradient at q' is q' − c; MAML multiplies by (1 − α)^k
    let c = vec![0.7, -1.1, 0.2];
    let q = Quadratic { center: c.clone() };
    let b = empty();
    let p = [1.5, 0.25, -2.0];
    for k in 1..=4 {
        for &alpha in &[0.1, 0.4, 0.9] {
            let fo = meta_gradient(&q, &p, &b, &b, &inner(alpha, k), true).unwrap();
            let maml = meta_gradient(&q, &p, &b, &b, &inner(alpha, k), false).unwrap();
            for i in 0..3 {
                let adapted = c[i] + (p[i] - c[i]) * (1.0f64 - alpha).powi(k as i32);
                assert!((fo.grad[i] - (adapted - c[i])).abs() < 1e-14);
                let want = (1.0f64 - alpha).powi(k as i32) * fo.grad[i];
                let rel = (maml.grad[i] - want).abs() / want.abs();
                assert!(rel <= 1e-13, "k={k} α={alpha}: relative error {rel:e}");
            }
        }
    }
}

fn tiny_net() -> Network {
    Network::new(Architecture { input_len: 16, filters: vec![4, 4], kernel: 3, n_way: 3, input_shift: 0.0, input_scale: 1.0 })
        .unwrap()
}

fn batch(rows: usize, seed: u64) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..rows * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
    Batch::new(Tensor::new(x, vec![rows, 16]), (0..rows).map(|i| i % 3).collect()).unwrap()
}

fn params(net: &Network, seed: u64) -> Vec<f64> {
    let mut p = ModelParams::<f64>::init(net.layout(), seed).values;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for s in net.layout().slots.iter().filter(|s| !s.name.ends_with("weight")) {
        p[s.offset..s.offset + s.len].iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
    }
    p
}

fn meta_loss(net: &Network, p: &[f64], s: &Batch<f64>, q: &Batch<f64>, cfg: &InnerConfig) -> f64 {
    let a = inner_adapt(net, p, s, cfg).unwrap();
    net.evaluate(&a.params, q).unwrap().0
}

#[test]
fn maml_gradient_matches_differenced_meta_loss() {
    let net = tiny_net();
    let p = params(&net, 2);
    let (s, q) = (batch(6, 3), batch(6, 4));
    for steps in [1, 2] {
        let cfg = InnerConfig { lr: 0.1, steps, clip: f64::INFINITY };
        let g = meta_gradient(&net, &p, &s, &q, &cfg, false).unwrap().grad;
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-5;
        for i in 0..p.len() {
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            let fd = (meta_loss(&net, &a, &s, &q, &cfg) - meta_loss(&net, &b, &s, &q, &cfg)) / (2.0 * h);
            let tol = 1e-3 * fd.abs().max(g[i].abs()).max(1e-3 * scale);
            assert!((fd - g[i]).abs() <= tol, "k={steps} param {i}: fd {fd} maml {}", g[i]);
        }
    }
}

#[test]
fn first_order_makes_no_hvp_calls() {
    let net = tiny_net();
    let p = params(&net, 5);
    let (s, q) = (batch(6, 6), batch(6, 7));
    meta_gradient(&net, &p, &s, &q, &inner(0.4, 3), true).unwrap();
    assert_eq!(net.hvp_calls(), 0);
    meta_gradient(&net, &p, &s, &q, &inner(0.4, 3), false).unwrap();
    assert_eq!(net.hvp_calls(), 3);
}

#[test]
fn non_finite_support_loss_aborts() {
    let net = tiny_net();
    let mut p = params(&net, 5);
    p[0] = f64::NAN;
    let err = inner_adapt(&net, &p, &batch(3, 1), &inner(0.4, 1)).unwrap_err();
    assert!(err.to_string().contains("non-finite"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn zero_inner_rate_collapses_both_forms(seed in 0u64..500) {
        let net = tiny_net();
        let p = params(&net, seed);
        let (s, q) = (batch(6, seed + 1), batch(6, seed + 2));
        let cfg = inner(0.0, 2);
        let maml = meta_gradient(&net, &p, &s, &q, &cfg, false).unwrap();
        let fo = meta_gradient(&net, &p, &s, &q, &cfg, true).unwrap();
        let direct = Objective::loss_grad(&net, &p, &q).unwrap().1;
        prop_assert_eq!(&maml.grad, &fo.grad);
        prop_assert_eq!(&fo.grad, &direct);
    }
}
