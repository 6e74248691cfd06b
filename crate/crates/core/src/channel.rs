//! Rician small-scale fading, log-distance path loss and link SNR.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::antenna::AntennaModel;
use crate::error::{domain, Result};
use crate::geom::LinkGeometry;
use crate::rng::rng_for;

/// K-factors at or above this value are treated as pure line of sight.
pub const KAPPA_LOS_LIMIT: f64 = 1e12;

/// Stand-in for `−∞ dB` when a linear power is exactly zero.
pub const DB_FLOOR: f64 = -400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Rician K-factor.
    pub kappa: f64,
    /// Per-tap amplitude scale.
    pub sigma_l: f64,
    pub num_taps: usize,
    /// Maximum Doppler shift in Hz; enters only the LoS phase.
    pub f_doppler: f64,
    /// Path loss at the reference distance, dB.
    pub pl0_db: f64,
    /// Path-loss exponent.
    pub eta: f64,
    /// Reference distance, meters.
    pub d0: f64,
    /// Standard deviation of log-normal shadowing, dB.
    pub sigma_p: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    pub p_t_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            kappa: 12.0,
            sigma_l: 1.0,
            num_taps: 1,
            f_doppler: 0.0,
            pl0_db: 40.0,
            eta: 2.0,
            d0: 1.0,
            sigma_p: 0.0,
            noise_power: 1e-11,
            p_t_dbm: 20.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(domain("path-loss exponent must be positive"));
        }
        self.check_draw()
    }

    /// Checks needed to draw a channel; a flat (`η = 0`) path loss is allowed.
    fn check_draw(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(domain("kappa must be non-negative"));
        }
        if !(self.eta >= 0.0) {
            return Err(domain("path-loss exponent must be non-negative"));
        }
        if !(self.d0 > 0.0) {
            return Err(domain("reference distance must be positive"));
        }
        if self.num_taps == 0 {
            return Err(domain("at least one tap is required"));
        }
        if !(self.noise_power > 0.0) {
            return Err(domain("noise power must be positive"));
        }
        if !(self.sigma_l >= 0.0 && self.sigma_p >= 0.0) {
            return Err(domain("scale parameters must be non-negative"));
        }
        if !(self.f_doppler.is_finite() && self.pl0_db.is_finite() && self.p_t_dbm.is_finite()) {
            return Err(domain("channel parameters must be finite"));
        }
        Ok(())
    }

    pub fn p_t_watts(&self) -> f64 {
        dbm_to_watts(self.p_t_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// `10·log10(x)`, or [`DB_FLOOR`] for non-positive input.
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// One fading coefficient split into its specular and scattered parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianTap {
    pub los: Complex64,
    pub diffuse: Complex64,
}

impl RicianTap {
    pub fn gain(&self) -> Complex64 {
        self.los + self.diffuse
    }
}

/// Specular term `√(κ/(κ+1))·σ·exp(j(2π f_D cos φ + ϕ))` for LoS phase `phase`.
pub fn los_component(params: &ChannelParams, phi_theta: f64, phase: f64) -> Complex64 {
    let arg = TAU * params.f_doppler * phi_theta.cos() + phase;
    let k = params.kappa;
    let amp = if k >= KAPPA_LOS_LIMIT { 1.0 } else { (k / (k + 1.0)).sqrt() };
    Complex64::from_polar(amp * params.sigma_l, arg)
}

/// Scattered term `√(1/(κ+1))·CN(0, σ²)`; zero in the pure-LoS limit.
pub fn diffuse_component<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    if params.kappa >= KAPPA_LOS_LIMIT {
        return Complex64::new(0.0, 0.0);
    }
    let s = (1.0 / (params.kappa + 1.0)).sqrt() * params.sigma_l * std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(a * s, b * s)
}

/// Draws one Rician tap from `rng`, with the LoS phase `ϕ` uniform on
/// `[0, 2π)`.
pub fn rician_components<R: Rng + ?Sized>(params: &ChannelParams, phi_theta: f64, rng: &mut R) -> RicianTap {
    let phase: f64 = rng.random::<f64>() * TAU;
    let los = los_component(params, phi_theta, phase);
    RicianTap { los, diffuse: diffuse_component(params, rng) }
}

/// Rician tap for elevation `phi_theta`, reproducible from `seed`.
pub fn draw_rician_tap(params: &ChannelParams, phi_theta: f64, seed: u64) -> Complex64 {
    rician_components(params, phi_theta, &mut rng_for(seed, &[])).gain()
}

/// K-factor as LoS power over mean diffuse power.
pub fn empirical_k_factor(taps: &[RicianTap]) -> f64 {
    let n = taps.len() as f64;
    let los: f64 = taps.iter().map(|t| t.los.norm_sqr()).sum::<f64>() / n;
    let diffuse: f64 = taps.iter().map(|t| t.diffuse.norm_sqr()).sum::<f64>() / n;
    los / diffuse
}

/// Moment-based K-factor estimate from the envelope alone,
/// `K = r / (1 − r)` with `r = √(1 − Var|g|² / E[|g|²]²)`.
pub fn moment_k_factor(gains: &[Complex64]) -> f64 {
    let n = gains.len() as f64;
    let mean = gains.iter().map(|g| g.norm_sqr()).sum::<f64>() / n;
    let var = gains.iter().map(|g| (g.norm_sqr() - mean).powi(2)).sum::<f64>() / n;
    let r = (1.0 - var / (mean * mean)).max(0.0).sqrt();
    r / (1.0 - r)
}

/// Log-distance path loss `PL₀ + 10η·log10(d/d₀) + X_g`.
///
/// `X_g ~ N(0, σ_p²)` in dB is drawn only when a seed is given.
pub fn path_loss_db(params: &ChannelParams, d: f64, shadowing_seed: Option<u64>) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("distance must be positive, got {d}")));
    }
    let mut pl = params.pl0_db + 10.0 * params.eta * (d / params.d0).log10();
    if let Some(seed) = shadowing_seed {
        if params.sigma_p > 0.0 {
            let shadow = Normal::new(0.0, params.sigma_p).map_err(|e| domain(e.to_string()))?;
            pl += shadow.sample(&mut rng_for(seed, &[u64::MAX]));
        }
    }
    Ok(pl)
}

/// One realization of the link: per-tap fading, large-scale gain and the
/// composite taps `h = √c · g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub taps: Vec<Complex64>,
    pub large_scale: f64,
    pub h: Vec<Complex64>,
}

impl ChannelDraw {
    /// `Σ |h|²` over taps.
    pub fn power_gain(&self) -> f64 {
        self.h.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Full channel draw for `geometry`, reproducible from `seed`.
///
/// Tap `ℓ` uses the stream derived from `(seed, ℓ)`. Shadowing is applied
/// when `sigma_p > 0`.
pub fn compose_channel(params: &ChannelParams, geometry: &LinkGeometry, seed: u64) -> Result<ChannelDraw> {
    params.check_draw()?;
    let pl = path_loss_db(params, geometry.d, (params.sigma_p > 0.0).then_some(seed))?;
    let large_scale = 10f64.powf(-pl / 10.0);
    let taps: Vec<Complex64> = (0..params.num_taps as u64)
        .map(|l| rician_components(params, geometry.phi_theta, &mut rng_for(seed, &[l])).gain())
        .collect();
    let root = large_scale.sqrt();
    let h = taps.iter().map(|g| g * root).collect();
    Ok(ChannelDraw { taps, large_scale, h })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssMeasurement {
    pub p_r_dbm: f64,
    pub snr_db: f64,
    pub snr_linear: f64,
}

/// Received power and SNR for a draw, antenna gains `(G_T, G_R)` and a
/// polarization loss factor.
///
/// Zero received power is reported as [`DB_FLOOR`] in both dB fields.
pub fn rss_and_snr(params: &ChannelParams, draw: &ChannelDraw, gains: (f64, f64), plf: f64) -> RssMeasurement {
    let (g_t, g_r) = gains;
    let power = draw.power_gain();
    let snr_linear = params.p_t_watts() * power * g_t * g_r * plf / params.noise_power;
    let p_r_dbm = if power * g_t * g_r * plf > 0.0 {
        params.p_t_dbm + to_db(power) + to_db(g_t) + to_db(g_r) + to_db(plf)
    } else {
        DB_FLOOR
    };
    RssMeasurement { p_r_dbm, snr_db: to_db(snr_linear), snr_linear }
}

/// Elevation and azimuth of the incident direction, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IncidentAngle {
    pub theta: f64,
    pub psi: f64,
}

/// Pointing errors of the two antennas: `t1`, `r1` in elevation and `t2`,
/// `r2` in azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Misalignment {
    pub t1: f64,
    pub t2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Link budget with both antenna gains evaluated at the perturbed angles
/// `(θ + δ₁, ψ + δ₂)`.
pub fn misaligned_snr(
    params: &ChannelParams,
    draw: &ChannelDraw,
    antennas: (&AntennaModel, &AntennaModel),
    angle: IncidentAngle,
    deltas: Misalignment,
    plf: f64,
) -> RssMeasurement {
    let (tx, rx) = antennas;
    let g_t = tx.gain_at_elevation(angle.psi + deltas.t2, angle.theta + deltas.t1, 0);
    let g_r = rx.gain_at_elevation(angle.psi + deltas.r2, angle.theta + deltas.r1, 1);
    rss_and_snr(params, draw, (g_t, g_r), plf)
}

/// Elevation at which the ideal vertical dipole has its null.
pub const DIPOLE_NULL_ELEVATION: f64 = FRAC_PI_2;
