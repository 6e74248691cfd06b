use std::f64::consts::PI;

use rand::Rng;
use threedpm::geom::{elevation_pdf, euler_zyx, euler_zyx_inverse, ElevationSupport, RotationMatrix, Vec3};
use threedpm::rng::rng_for;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn matmul(a: &RotationMatrix, b: &RotationMatrix) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a.0[i][k] * b.0[k][j]).sum()))
}

#[test]
fn random_euler_triples_are_rotations() {
    let mut rng = rng_for(11, &[]);
    for _ in 0..10_000 {
        let (y, p, r) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let m = euler_zyx(y, p, r);
        assert!(m.orthonormality_error() < 1e-10);
        assert!((m.det() - 1.0).abs() < 1e-10);
        let prod = matmul(&m, &euler_zyx_inverse(y, p, r));
        for (i, row) in prod.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - f64::from(u8::from(i == j))).abs() < 1e-10);
            }
        }
        let v = Vec3::new(rng.random(), rng.random(), rng.random());
        assert!((m.apply(v).norm() - v.norm()).abs() < 1e-10);
    }
}

#[test]
fn elevation_density_normalizes() {
    for &(dz, lo, hi) in &[(5.0, 10.0, 100.0), (-5.0, 10.0, 100.0), (50.0, 1.0, 2.0), (1.0, 0.5, 1000.0)] {
        let s = ElevationSupport::new(dz, lo, hi).unwrap();
        let total = simpson(|phi| elevation_pdf(phi, dz, lo, hi).unwrap(), s.lower, s.upper, 200_000);
        assert!((total - 1.0).abs() < 1e-6, "{dz} {lo} {hi}: {total}");
    }
}

#[test]
fn elevation_density_matches_sampled_histogram() {
    let (dz, lo, hi) = (5.0_f64, 10.0, 100.0);
    let s = ElevationSupport::new(dz, lo, hi).unwrap();
    let mut rng = rng_for(12, &[]);
    let n = 200_000;
    let bins = 20;
    let width = (s.upper - s.lower) / bins as f64;
    let mut counts = vec![0usize; bins];
    for _ in 0..n {
        let d: f64 = rng.random_range(lo..hi);
        let phi = (dz / d).atan();
        counts[(((phi - s.lower) / width) as usize).min(bins - 1)] += 1;
    }
    for (b, &c) in counts.iter().enumerate() {
        let a = s.lower + b as f64 * width;
        let p = simpson(|x| elevation_pdf(x, dz, lo, hi).unwrap(), a, a + width, 200);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((c as f64 / n as f64 - p).abs() < 5.0 * sd + 1e-9, "bin {b}");
    }
}
