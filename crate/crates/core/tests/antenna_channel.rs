use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use threedpm::antenna::{directivity, dipole_directivity, impaired_pattern, kraus_directivity, AntennaModel, ImpairmentModel};
use threedpm::channel::{empirical_k_factor, path_loss_db, rician_components, ChannelParams};
use threedpm::rng::rng_for;

#[test]
fn short_dipole_directivity() {
    assert!((dipole_directivity() - 1.5).abs() < 1e-6);
    // isotropic radiator
    assert!((directivity(|_, _| 1.0, 200, 4) - 1.0).abs() < 1e-9);
    // sin⁴θ: 4π / (2π · 16/15) = 15/8
    assert!((directivity(|t, _| t.sin().powi(4), 2000, 4) - 15.0 / 8.0).abs() < 1e-6);
}

#[test]
fn kraus_estimate_for_quarter_beamwidths() {
    let expected = 16.0 * std::f64::consts::LN_2 / (PI * PI / 4.0);
    assert!((kraus_directivity(FRAC_PI_2, FRAC_PI_2).unwrap() - expected).abs() < 1e-12);
    assert!((expected - 4.4948).abs() < 1e-3);
}

#[test]
fn impaired_pattern_is_unbiased_at_broadside() {
    let imp = ImpairmentModel { var_psi: 0.04, var_theta: 0.04, seed: 3 };
    let model = AntennaModel::impaired(imp);
    let n = 100_000;
    let (mut se, mut sh) = (0.0, 0.0);
    for i in 0..n {
        let p = impaired_pattern(&model, 0.3, FRAC_PI_2, i);
        se += p.e_plane;
        sh += p.h_plane;
    }
    let tol = 3.0 * 0.2 / (n as f64).sqrt();
    assert!((se / n as f64 - 1.0).abs() < tol);
    assert!((sh / n as f64 - 1.0).abs() < tol);
}

#[test]
fn rician_moments() {
    let n = 200_000;
    for &kappa in &[0.0, 1.0, 12.0] {
        let params = ChannelParams { kappa, ..ChannelParams::default() };
        let mut rng = rng_for(kappa as u64, &[21]);
        let taps: Vec<_> = (0..n).map(|_| rician_components(&params, 0.4, &mut rng)).collect();
        let power = taps.iter().map(|t| t.gain().norm_sqr()).sum::<f64>() / n as f64;
        assert!((power - 1.0).abs() < 0.01, "κ={kappa}: {power}");
        if kappa > 0.0 {
            let k = empirical_k_factor(&taps);
            assert!((k - kappa).abs() / kappa < 0.05, "κ={kappa}: {k}");
        } else {
            assert!(taps.iter().all(|t| t.los == Complex64::new(0.0, 0.0)));
        }
    }
}

#[test]
fn path_loss_plug_in() {
    let p = ChannelParams { pl0_db: 40.0, eta: 2.7, d0: 1.0, ..ChannelParams::default() };
    for &d in &[1.0_f64, 10.0, 100.5, 1234.0] {
        let expected = 40.0 + 27.0 * d.log10();
        assert_eq!(path_loss_db(&p, d, None).unwrap(), expected);
    }
    assert!(path_loss_db(&p, 0.0, None).is_err());
}
