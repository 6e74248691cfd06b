//! Short-dipole radiation patterns, directivity and polarization loss.
//!
//! Pattern angles in this module are polar: `theta` is measured from the
//! dipole axis, so the broadside maximum sits at `theta = π/2`. Elevation
//! angles measured from the horizon convert with `theta = π/2 − elevation`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geom::Vec3;
use crate::rng::rng_for;

/// Peak directivity of the ideal short dipole.
pub const DIPOLE_DIRECTIVITY: f64 = 1.5;

/// Principal-plane amplitude gains at one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    pub e_plane: f64,
    pub h_plane: f64,
}

impl PatternSample {
    /// Power pattern, the product of the squared plane amplitudes.
    pub fn power(&self) -> f64 {
        self.e_plane * self.e_plane * self.h_plane * self.h_plane
    }
}

/// Fabrication defect of one antenna: an additive Gaussian perturbation of
/// the ideal pattern with diagonal covariance `diag(var_psi, var_theta)`.
///
/// The perturbation is centred on the ideal pattern, so the mean of the
/// impaired pattern equals the nominal one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpairmentModel {
    /// Variance of the H-plane (azimuth) perturbation.
    pub var_psi: f64,
    /// Variance of the E-plane (elevation) perturbation.
    pub var_theta: f64,
    pub seed: u64,
}

impl Default for ImpairmentModel {
    fn default() -> Self {
        Self { var_psi: 0.2, var_theta: 0.2, seed: 0 }
    }
}

impl ImpairmentModel {
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.var_psi, 0.0], [0.0, self.var_theta]]
    }

    fn validate(&self) -> Result<()> {
        if !(self.var_psi >= 0.0 && self.var_theta >= 0.0) {
            return Err(domain("impairment variances must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaModel {
    pub ideal: bool,
    #[serde(default)]
    pub impairment: Option<ImpairmentModel>,
    /// E-plane half-power beamwidth, radians.
    pub hpbw_e: f64,
    /// H-plane half-power beamwidth, radians.
    pub hpbw_h: f64,
}

impl Default for AntennaModel {
    fn default() -> Self {
        Self { ideal: true, impairment: None, hpbw_e: FRAC_PI_2, hpbw_h: FRAC_PI_2 }
    }
}

impl AntennaModel {
    pub fn impaired(impairment: ImpairmentModel) -> Self {
        Self { ideal: false, impairment: Some(impairment), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hpbw_e", self.hpbw_e), ("hpbw_h", self.hpbw_h)] {
            if !(v > 0.0 && v <= PI) {
                return Err(domain(format!("{name} must lie in (0, π], got {v}")));
            }
        }
        match (self.ideal, &self.impairment) {
            (false, None) => Err(domain("non-ideal antenna needs an impairment model")),
            (_, Some(imp)) => imp.validate(),
            _ => Ok(()),
        }
    }

    /// Power gain toward polar angle `theta`, `1.5 · F_E² · F_H²`.
    pub fn gain(&self, psi: f64, theta: f64, draw_seed: u64) -> f64 {
        DIPOLE_DIRECTIVITY * impaired_pattern(self, psi, theta, draw_seed).power()
    }

    /// Power gain toward an elevation angle measured from the horizon.
    pub fn gain_at_elevation(&self, psi: f64, elevation: f64, draw_seed: u64) -> f64 {
        self.gain(psi, FRAC_PI_2 - elevation, draw_seed)
    }
}

/// Normalized short-dipole radiation intensity `sin²θ`.
pub fn dipole_radiation_intensity(theta: f64) -> f64 {
    let s = theta.sin();
    s * s
}

/// `4π · max U / ∮ U dΩ` by quadrature: composite Simpson over the polar
/// angle and the periodic trapezoid rule over azimuth.
///
/// `u` is called as `u(theta, psi)`; the maximum is taken over the grid.
pub fn directivity(u: impl Fn(f64, f64) -> f64, n_theta: usize, n_psi: usize) -> f64 {
    let n_theta = (n_theta.max(2) + 1) & !1;
    let n_psi = n_psi.max(1);
    let h = PI / n_theta as f64;
    let dpsi = TAU / n_psi as f64;
    let mut total = 0.0;
    let mut peak = f64::NEG_INFINITY;
    for j in 0..n_psi {
        let psi = j as f64 * dpsi;
        let mut s = 0.0;
        for i in 0..=n_theta {
            let theta = i as f64 * h;
            let v = u(theta, psi);
            peak = peak.max(v);
            let w = if i == 0 || i == n_theta {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * v * theta.sin();
        }
        total += s * h / 3.0 * dpsi;
    }
    4.0 * PI * peak / total
}

/// Directivity of the ideal short dipole.
pub fn dipole_directivity() -> f64 {
    directivity(|theta, _| dipole_radiation_intensity(theta), 2000, 8)
}

/// Beam directivity from the two principal-plane half-power beamwidths.
///
/// Each plane contributes `16 ln 2 / Ω²` and the two are combined by their
/// harmonic mean.
pub fn kraus_directivity(hpbw_e: f64, hpbw_h: f64) -> Result<f64> {
    for v in [hpbw_e, hpbw_h] {
        if !(v > 0.0 && v <= PI) {
            return Err(domain(format!("half-power beamwidth must lie in (0, π], got {v}")));
        }
    }
    let d_e = 16.0 * std::f64::consts::LN_2 / (hpbw_e * hpbw_e);
    let d_h = 16.0 * std::f64::consts::LN_2 / (hpbw_h * hpbw_h);
    Ok(2.0 / (1.0 / d_e + 1.0 / d_h))
}

fn degree_bin(angle: f64) -> u64 {
    (angle.rem_euclid(TAU).to_degrees().floor() as u64) % 360
}

/// E- and H-plane amplitudes toward `(psi, theta)`.
///
/// The ideal short dipole has `F_E = |sin θ|` and an omnidirectional
/// `F_H = 1`. A non-ideal model adds a Gaussian defect drawn from
/// `(impairment seed, draw_seed, 1° ψ bin, 1° θ bin)`, so a given antenna
/// instance always returns the same defective pattern. Amplitudes are
/// clamped at zero.
pub fn impaired_pattern(model: &AntennaModel, psi: f64, theta: f64, draw_seed: u64) -> PatternSample {
    let ideal = PatternSample { e_plane: theta.sin().abs(), h_plane: 1.0 };
    let imp = match (model.ideal, model.impairment) {
        (false, Some(imp)) => imp,
        _ => return ideal,
    };
    if imp.var_psi == 0.0 && imp.var_theta == 0.0 {
        return ideal;
    }
    let mut rng = rng_for(imp.seed, &[draw_seed, degree_bin(psi), degree_bin(theta)]);
    let z_h: f64 = StandardNormal.sample(&mut rng);
    let z_e: f64 = StandardNormal.sample(&mut rng);
    PatternSample {
        e_plane: (ideal.e_plane + imp.var_theta.sqrt() * z_e).max(0.0),
        h_plane: (ideal.h_plane + imp.var_psi.sqrt() * z_h).max(0.0),
    }
}

/// Wave and antenna polarization unit vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarization {
    pub wave: Vec3,
    pub antenna: Vec3,
}

impl Polarization {
    /// Normalizes both vectors; zero vectors are rejected.
    pub fn new(wave: Vec3, antenna: Vec3) -> Result<Self> {
        let wave = wave.normalized().ok_or_else(|| domain("zero wave polarization"))?;
        let antenna = antenna.normalized().ok_or_else(|| domain("zero antenna polarization"))?;
        Ok(Self { wave, antenna })
    }
}

/// Polarization loss factor `|p_ω · p_A|²`.
pub fn plf(pol: &Polarization) -> f64 {
    let c = pol.wave.dot(pol.antenna);
    (c * c).min(1.0)
}

/// Loss factor for mismatch angles about the two principal axes,
/// `cos²θ̂ · cos²ψ̂`.
pub fn plf_mismatch(theta_hat: f64, psi_hat: f64) -> f64 {
    let (ct, cp) = (theta_hat.cos(), psi_hat.cos());
    ct * ct * cp * cp
}

/// Received power after the azimuth and elevation polarization losses.
pub fn apply_plf(p_r_watts: f64, plf_psi: f64, plf_theta: f64) -> f64 {
    plf_psi * plf_theta * p_r_watts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RotationMatrix;

    #[test]
    fn intensity_values() {
        assert_eq!(dipole_radiation_intensity(FRAC_PI_2), 1.0);
        assert_eq!(dipole_radiation_intensity(0.0), 0.0);
        assert!((dipole_radiation_intensity(PI / 4.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dipole_and_isotropic_directivity() {
        assert!((dipole_directivity() - 1.5).abs() < 1e-6);
        assert!((directivity(|_, _| 1.0, 200, 4) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lossless_gain_equals_directivity() {
        let m = AntennaModel::default();
        assert!((m.gain(0.0, FRAC_PI_2, 0) - dipole_directivity()).abs() < 1e-6);
    }

    #[test]
    fn kraus_values() {
        let h = FRAC_PI_2;
        let d = kraus_directivity(h, h).unwrap();
        let closed = 16.0 * 2f64.ln() / (h * h);
        assert!((d - closed).abs() < 1e-12);
        assert!((d - 4.4948).abs() < 1e-3);
        let q = kraus_directivity(h / 2.0, h / 2.0).unwrap();
        assert!((q - 4.0 * d).abs() < 1e-9);
        assert!(kraus_directivity(0.0, h).is_err());
    }

    #[test]
    fn kraus_decreases_in_each_beamwidth() {
        let mut prev = f64::INFINITY;
        for i in 1..=30 {
            let w = i as f64 * PI / 30.0;
            let d = kraus_directivity(w, 1.0).unwrap();
            assert!(d < prev);
            assert!(kraus_directivity(1.0, w).unwrap() == d);
            prev = d;
        }
    }

    #[test]
    fn ideal_pattern_shape() {
        let m = AntennaModel::default();
        let p = impaired_pattern(&m, 0.0, FRAC_PI_2, 0);
        assert_eq!(p.e_plane, 1.0);
        assert_eq!(p.h_plane, 1.0);
        for psi in [0.0, 1.0, 2.5, 5.0] {
            assert_eq!(impaired_pattern(&m, psi, 0.7, 3), impaired_pattern(&m, 0.0, 0.7, 3));
        }
    }

    #[test]
    fn zero_variance_impairment_is_ideal() {
        let m = AntennaModel::impaired(ImpairmentModel { var_psi: 0.0, var_theta: 0.0, seed: 9 });
        let ideal = AntennaModel::default();
        for theta in [0.1, 0.9, 2.0] {
            assert_eq!(impaired_pattern(&m, 0.4, theta, 1), impaired_pattern(&ideal, 0.4, theta, 1));
        }
    }

    #[test]
    fn impairment_is_frozen_per_instance() {
        let m = AntennaModel::impaired(ImpairmentModel::default());
        let a = impaired_pattern(&m, 0.4, 1.2, 7);
        assert_eq!(a, impaired_pattern(&m, 0.4, 1.2, 7));
        // same 1° cell, same defect on top of the ideal shape
        let b = impaired_pattern(&m, 0.4 + 1e-4, 1.2 + 1e-4, 7);
        let shift = (1.2f64 + 1e-4).sin() - 1.2f64.sin();
        assert!((b.e_plane - a.e_plane - shift).abs() < 1e-12);
        assert_eq!(a.h_plane, b.h_plane);
        assert_ne!(a, impaired_pattern(&m, 0.4, 1.2, 8));
    }

    #[test]
    fn plf_cases() {
        let aligned = Polarization::new(Vec3::Z, Vec3::Z).unwrap();
        assert_eq!(plf(&aligned), 1.0);
        let orth = Polarization::new(Vec3::Z, Vec3::X).unwrap();
        assert_eq!(plf(&orth), 0.0);
        let tilted = RotationMatrix::rx(PI / 3.0).apply(Vec3::Z);
        let p = plf(&Polarization::new(Vec3::Z, tilted).unwrap());
        assert!((p - 0.25).abs() < 1e-12);
        assert!((plf_mismatch(PI / 3.0, 0.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn plf_decomposes_into_axis_factors() {
        // antenna tilted by θ̂ about x then ψ̂ about y, wave along z
        for (t, p) in [(0.3, 0.2), (1.0, -0.4), (0.0, 0.9)] {
            let a = (RotationMatrix::ry(p) * RotationMatrix::rx(t)).apply(Vec3::Z);
            let v = plf(&Polarization::new(Vec3::Z, a).unwrap());
            assert!((v - plf_mismatch(t, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn plf_is_symmetric_and_bounded() {
        let a = Vec3::new(0.3, -1.0, 2.0);
        let b = Vec3::new(1.5, 0.2, -0.7);
        let ab = plf(&Polarization::new(a, b).unwrap());
        let ba = plf(&Polarization::new(b, a).unwrap());
        assert_eq!(ab, ba);
        assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn apply_plf_cases() {
        assert_eq!(apply_plf(1.0, 1.0, 1.0), 1.0);
        assert_eq!(apply_plf(1.0, 0.5, 0.5), 0.25);
        assert_eq!(apply_plf(0.0, 0.3, 0.9), 0.0);
    }

    #[test]
    fn model_validation() {
        assert!(AntennaModel::default().validate().is_ok());
        let bad = AntennaModel { ideal: false, impairment: None, ..AntennaModel::default() };
        assert!(bad.validate().is_err());
        let wide = AntennaModel { hpbw_e: 4.0, ..AntennaModel::default() };
        assert!(wide.validate().is_err());
    }
}
