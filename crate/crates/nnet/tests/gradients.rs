use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threedpm_nnet::{cross_entropy, Architecture, Batch, ModelParams, Network, Objective, Quadratic, Tensor};

fn tiny() -> Architecture {
    Architecture { input_len: 16, filters: vec![8, 8], kernel: 3, n_way: 3, input_shift: 0.5, input_scale: 1.5 }
}

fn random_batch(b: usize, l: usize, n: usize, seed: u64) -> (Tensor<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..b * l).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..b).map(|i| i % n).collect();
    (Tensor::new(x, vec![b, l]), y)
}

/// Random parameters with BN shifts away from zero so ReLUs are mixed.
fn random_params(net: &Network, seed: u64) -> Vec<f64> {
    let mut p = ModelParams::<f64>::init(net.layout(), seed).values;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for s in &net.layout().slots {
        if s.name.ends_with("bias") || s.name.ends_with("beta") || s.name.ends_with("gamma") {
            for v in &mut p[s.offset..s.offset + s.len] {
                *v += rng.random_range(-0.3..0.3);
            }
        }
    }
    p
}

fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

#[test]
fn gradient_matches_central_differences() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 3);
    let (x, y) = random_batch(6, 16, 3, 4);
    let g = net.grad(&p, &x, &y).unwrap();
    let h = 1e-5;
    let mut worst = (0.0f64, String::new());
    for s in &net.layout().slots {
        for i in s.offset..s.offset + s.len {
            let mut q = p.clone();
            q[i] = p[i] + h;
            let up = net.loss(&q, &x, &y).unwrap();
            q[i] = p[i] - h;
            let down = net.loss(&q, &x, &y).unwrap();
            let fd = (up - down) / (2.0 * h);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            if err > worst.0 {
                worst = (err, format!("{} [{}]: fd {fd:e} analytic {:e}", s.name, i - s.offset, g[i]));
            }
        }
    }
    assert!(worst.0 <= 1e-4, "worst {}: {}", worst.0, worst.1);
}

#[test]
fn hvp_matches_differenced_gradient() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 5);
    let (x, y) = random_batch(5, 16, 3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let hv = net.hvp(&p, &x, &y, &v).unwrap();
    let e = 1e-5;
    let shifted = |s: f64| -> Vec<f64> { p.iter().zip(&v).map(|(a, b)| a + s * b).collect() };
    let gp = net.grad(&shifted(e), &x, &y).unwrap();
    let gm = net.grad(&shifted(-e), &x, &y).unwrap();
    let scale = hv.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    for i in 0..p.len() {
        let fd = (gp[i] - gm[i]) / (2.0 * e);
        assert!(close(hv[i], fd, 1e-3, 1e-3 * scale), "entry {i}: hvp {} fd {}", hv[i], fd);
    }
}

#[test]
fn hvp_of_zero_is_zero() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 8);
    let (x, y) = random_batch(4, 16, 3, 9);
    let hv = net.hvp(&p, &x, &y, &vec![0.0; p.len()]).unwrap();
    assert!(hv.iter().all(|&a| a == 0.0));
}

#[test]
fn quadratic_toy_has_identity_hessian() {
    let q = Quadratic { center: vec![0.5, -1.0, 2.0] };
    let b = Batch::new(Tensor::<f64>::zeros(vec![1, 1]), vec![0]).unwrap();
    let v = vec![0.3, 1.7, -2.2];
    assert_eq!(q.hvp(&[1.0, 1.0, 1.0], &b, &v).unwrap(), v);
}

#[test]
fn dead_paths_give_zero_conv_gradient() {
    let net = Network::new(tiny()).unwrap();
    let p = ModelParams::<f64>::zeros(net.layout()).values;
    let x = Tensor::new(vec![0.5; 4 * 16], vec![4, 16]);
    let g = net.grad(&p, &x, &[0, 1, 2, 0]).unwrap();
    for s in net.layout().slots.iter().filter(|s| s.name.contains("conv")) {
        assert!(g[s.offset..s.offset + s.len].iter().all(|&a| a == 0.0), "{}", s.name);
    }
}

#[test]
fn duplicated_batch_has_same_gradient() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 10);
    let (x, y) = random_batch(4, 16, 3, 11);
    let mut xx = x.data().to_vec();
    xx.extend_from_slice(x.data());
    let yy: Vec<usize> = y.iter().chain(&y).copied().collect();
    let g1 = net.grad(&p, &x, &y).unwrap();
    let g2 = net.grad(&p, &Tensor::new(xx, vec![8, 16]), &yy).unwrap();
    let scale = g1.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    for (a, b) in g1.iter().zip(&g2) {
        assert!(close(*a, *b, 1e-9, scale), "{a} vs {b}");
    }
}

#[test]
fn zero_head_gives_uniform_probabilities() {
    let net = Network::new(Architecture::standard(10)).unwrap();
    let mut p = ModelParams::<f64>::init(net.layout(), 1).values;
    let w = net.layout().slot("head.weight").unwrap();
    p[w.offset..w.offset + w.len].iter_mut().for_each(|v| *v = 0.0);
    let (x, y) = random_batch(3, 100, 10, 2);
    let probs = net.forward(&p, &x).unwrap();
    assert!(probs.data().iter().all(|&v| (v - 0.1).abs() < 1e-15));
    let ce = cross_entropy(&probs, &y).unwrap();
    assert!((ce - 10f64.ln()).abs() < 1e-12);
}

#[test]
fn frozen_statistics_make_rows_independent() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 12);
    let (reference, _) = random_batch(10, 16, 3, 13);
    let stats = net.batch_stats(&p, &reference).unwrap();
    let row = reference.row(0).to_vec();
    let one = net.forward_frozen(&p, &Tensor::new(row.clone(), vec![1, 16]), &stats).unwrap();
    let eight = net.forward_frozen(&p, &Tensor::new(row.repeat(8), vec![8, 16]), &stats).unwrap();
    for r in 0..8 {
        assert_eq!(eight.row(r), one.row(0));
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 1);
    assert!(net.forward(&p, &Tensor::<f64>::zeros(vec![2, 15])).is_err());
    assert!(net.forward(&p[1..], &Tensor::<f64>::zeros(vec![2, 16])).is_err());
    assert!(net.loss(&p, &Tensor::<f64>::zeros(vec![2, 16]), &[0, 5]).is_err());
}

#[test]
fn counters_track_calls() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 1);
    let (x, y) = random_batch(3, 16, 3, 1);
    net.grad(&p, &x, &y).unwrap();
    net.hvp(&p, &x, &y, &p).unwrap();
    net.hvp(&p, &x, &y, &p).unwrap();
    assert_eq!((net.grad_calls(), net.hvp_calls()), (1, 2));
}

#[test]
fn single_precision_tracks_double() {
    let net = Network::new(tiny()).unwrap();
    let p = random_params(&net, 14);
    let (x, y) = random_batch(6, 16, 3, 15);
    let g64 = net.grad(&p, &x, &y).unwrap();
    let p32: Vec<f32> = p.iter().map(|&v| v as f32).collect();
    let g32 = net.grad(&p32, &x.cast::<f32>(), &y).unwrap();
    let scale = g64.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    for (a, b) in g64.iter().zip(&g32) {
        assert!((a - *b as f64).abs() <= 1e-3 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn softmax_rows_are_distributions(seed in 0u64..1000, b in 1usize..6) {
        let net = Network::new(tiny()).unwrap();
        let p = random_params(&net, seed);
        let (x, y) = random_batch(b, 16, 3, seed + 1);
        let probs = net.forward(&p, &x).unwrap();
        for r in 0..b {
            let row = probs.row(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        prop_assert!(cross_entropy(&probs, &y).unwrap() >= 0.0);
    }

    #[test]
    fn hvp_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0) {
        let net = Network::new(tiny()).unwrap();
        let p = random_params(&net, seed);
        let (x, y) = random_batch(4, 16, 3, seed + 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
        let v1: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v2: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| alpha * a + b).collect();
        let h1 = net.hvp(&p, &x, &y, &v1).unwrap();
        let h2 = net.hvp(&p, &x, &y, &v2).unwrap();
        let hm = net.hvp(&p, &x, &y, &mix).unwrap();
        for i in 0..p.len() {
            prop_assert!((hm[i] - (alpha * h1[i] + h2[i])).abs() <= 1e-8 * (1.0 + hm[i].abs()));
        }
    }
}
