//! Non-learning angle estimators and angle-error bookkeeping.
//!
//! [`conventional_estimate`] matches a differential RSS profile against a
//! pattern template. [`sweep_azimuth`] recovers the azimuth by steering the
//! receive dipole toward the estimated elevation, rotating it through a full
//! turn and picking the beam sample with the lowest received power.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::antenna::AntennaModel;
use crate::channel::{compose_channel, to_db, ChannelDraw, ChannelParams, IncidentAngle};
use crate::error::{config, domain, Error, Result};
use crate::geom::{spherical_basis, LinkGeometry, RotationMatrix, Vec3};
use crate::rng::{derive_seed, rng_for};

/// Profile relative to its first entry.
fn differential(v: &[f64]) -> Vec<f64> {
    let first = v.first().copied().unwrap_or(0.0);
    v.iter().map(|x| x - first).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConventionalEstimate {
    pub angle: f64,
    /// Matching score `1 / ‖Λ(φ) − ΔP_R‖²`; infinite on an exact match.
    pub score: f64,
    /// Number of candidates sharing the best score.
    pub multiplicity: usize,
}

/// Minimum differential-RSS estimate over candidate angles.
///
/// Both the measured profile and each template are differenced against
/// their first entry before matching, so a constant offset on the
/// measurements does not move the estimate. Ties go to the smaller `|φ|`.
pub fn conventional_estimate(rss_profile: &[f64], template: &[(f64, Vec<f64>)]) -> Result<ConventionalEstimate> {
    if template.is_empty() {
        return Err(config("empty pattern template"));
    }
    let measured = differential(rss_profile);
    let mut best: Option<ConventionalEstimate> = None;
    for (angle, lambda) in template {
        if lambda.len() != rss_profile.len() {
            return Err(config(format!(
                "template at {angle} has {} entries, profile has {}",
                lambda.len(),
                rss_profile.len()
            )));
        }
        let dist: f64 = differential(lambda).iter().zip(&measured).map(|(a, b)| (a - b) * (a - b)).sum();
        let score = if dist == 0.0 { f64::INFINITY } else { 1.0 / dist };
        best = Some(match best {
            None => ConventionalEstimate { angle: *angle, score, multiplicity: 1 },
            Some(b) if score > b.score => ConventionalEstimate { angle: *angle, score, multiplicity: 1 },
            Some(b) if score == b.score => ConventionalEstimate {
                angle: if angle.abs() < b.angle.abs() { *angle } else { b.angle },
                score,
                multiplicity: b.multiplicity + 1,
            },
            Some(b) => b,
        });
    }
    best.ok_or_else(|| config("empty pattern template"))
}

/// Ideal-dipole RSS template: for each candidate elevation, the received
/// gain in dB with the receive antenna tilted by each probe offset.
pub fn dipole_template(candidates: &[f64], probe_offsets: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let ant = AntennaModel::default();
    candidates
        .iter()
        .map(|&phi| (phi, probe_offsets.iter().map(|&o| to_db(ant.gain_at_elevation(0.0, phi + o, 0))).collect()))
        .collect()
}

/// Body axis carrying the sweep rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    #[default]
    Z,
    Y,
    X,
}

/// Rotation used to tilt the dipole toward the estimated elevation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Steering {
    #[default]
    Pitch,
    Roll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingMode {
    /// One fading draw shared by every beam sample.
    #[default]
    Frozen,
    /// A fresh fading draw per beam sample.
    Redrawn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSweepConfig {
    pub steps: usize,
    pub axis: SweepAxis,
    pub steering: Steering,
    pub theta_est: f64,
}

impl BeamSweepConfig {
    pub fn new(steps: usize, theta_est: f64) -> Self {
        Self { steps, axis: SweepAxis::Z, steering: Steering::Pitch, theta_est }
    }
}

/// What the sweep observes: the true incident direction plus the link
/// model that turns each beam sample into a received power.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepScene {
    pub truth: IncidentAngle,
    pub channel: ChannelParams,
    pub antenna: AntennaModel,
    /// When `None`, fading is ignored and the sweep is noiseless.
    pub fading: Option<FadingMode>,
    /// Standard deviation of additive measurement noise, dB.
    pub noise_db: f64,
    pub seed: u64,
}

impl SweepScene {
    pub fn noiseless(truth: IncidentAngle) -> Self {
        Self {
            truth,
            channel: ChannelParams::default(),
            antenna: AntennaModel::default(),
            fading: None,
            noise_db: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSample {
    pub l: usize,
    pub angle_rad: f64,
    pub p_r_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub samples: Vec<SweepSample>,
    pub best: usize,
    pub azimuth: f64,
    /// Set when two or fewer beam samples cannot resolve the azimuth.
    pub degenerate: bool,
}

/// Dipole axis after steering to `theta_est` and sweeping to angle `t`.
pub fn steered_axis(cfg: &BeamSweepConfig, t: f64) -> Vec3 {
    let tilt = FRAC_PI_2 - cfg.theta_est;
    let steer = match cfg.steering {
        Steering::Pitch => RotationMatrix::ry(tilt),
        Steering::Roll => RotationMatrix::rx(-tilt),
    };
    let sweep = match cfg.axis {
        SweepAxis::Z => RotationMatrix::rz(t),
        SweepAxis::Y => RotationMatrix::ry(t),
        SweepAxis::X => RotationMatrix::rx(t),
    };
    (sweep * steer).apply(Vec3::Z)
}

fn wrap_tau(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Sweeps the steered dipole through `steps` rotations and returns the
/// azimuth of the axis at the received-power minimum, where the dipole
/// null points at the incoming wave.
pub fn sweep_azimuth(scene: &SweepScene, cfg: &BeamSweepConfig) -> Result<SweepResult> {
    if cfg.steps < 2 {
        return Err(config("a sweep needs at least two beam samples"));
    }
    if !cfg.theta_est.is_finite() {
        return Err(domain("estimated elevation must be finite"));
    }
    let (incoming, _, _) = spherical_basis(scene.truth.theta, scene.truth.psi);
    let geometry = LinkGeometry::from_offsets(100.0, 10.0, 5.0)?;
    let frozen = match scene.fading {
        Some(FadingMode::Frozen) => Some(compose_channel(&scene.channel, &geometry, scene.seed)?),
        _ => None,
    };
    let noise = if scene.noise_db > 0.0 {
        Some(Normal::new(0.0, scene.noise_db).map_err(|e| domain(e.to_string()))?)
    } else {
        None
    };
    let mut samples = Vec::with_capacity(cfg.steps);
    for l in 0..cfg.steps {
        let t = TAU * l as f64 / cfg.steps as f64;
        let axis = steered_axis(cfg, t);
        let polar = axis.dot(incoming).clamp(-1.0, 1.0).acos();
        let gain = scene.antenna.gain(0.0, polar, scene.seed);
        let mut p = scene.channel.p_t_dbm + to_db(gain);
        let draw: Option<ChannelDraw> = match scene.fading {
            Some(FadingMode::Frozen) => frozen.clone(),
            Some(FadingMode::Redrawn) => {
                Some(compose_channel(&scene.channel, &geometry, derive_seed(scene.seed, &[l as u64]))?)
            }
            None => None,
        };
        if let Some(d) = draw {
            p += to_db(d.power_gain());
        }
        if let Some(n) = &noise {
            p += n.sample(&mut rng_for(scene.seed, &[0x006e_6f69_7365, l as u64]));
        }
        samples.push(SweepSample { l, angle_rad: t, p_r_dbm: p });
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.p_r_dbm), hi.max(s.p_r_dbm)));
    if hi - lo <= 1e-9 {
        return Err(Error::Ambiguous(format!("flat sweep over {} samples", cfg.steps)));
    }
    let best = samples
        .iter()
        .min_by(|a, b| a.p_r_dbm.total_cmp(&b.p_r_dbm))
        .map(|s| s.l)
        .unwrap_or(0);
    let axis = steered_axis(cfg, samples[best].angle_rad);
    let azimuth = wrap_tau(axis.y.atan2(axis.x));
    Ok(SweepResult { samples, best, azimuth, degenerate: cfg.steps <= 2 })
}

/// Absolute difference of two azimuths on the circle.
pub fn azimuth_error(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Angular range the classes partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleSpan {
    /// `[−π/2, π/2)`, linear error.
    Elevation,
    /// `[0, 2π)`, wrapped error.
    Azimuth,
}

impl AngleSpan {
    fn width(self) -> f64 {
        match self {
            AngleSpan::Elevation => PI,
            AngleSpan::Azimuth => TAU,
        }
    }

    /// Index of the class containing `angle` among `n` equal bins.
    pub fn bin(self, angle: f64, n: usize) -> usize {
        let rel = match self {
            AngleSpan::Elevation => angle + FRAC_PI_2,
            AngleSpan::Azimuth => angle.rem_euclid(TAU),
        };
        ((rel / self.width() * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    /// Center of class `b` among `n` equal bins.
    pub fn center(self, b: usize, n: usize) -> f64 {
        let start = match self {
            AngleSpan::Elevation => -FRAC_PI_2,
            AngleSpan::Azimuth => 0.0,
        };
        start + (b as f64 + 0.5) * self.width() / n as f64
    }

    fn error(self, a: f64, b: f64) -> f64 {
        match self {
            AngleSpan::Elevation => (a - b).abs(),
            AngleSpan::Azimuth => azimuth_error(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleErrorReport {
    /// Errors of predictions that landed in the true class.
    pub eps1_samples: Vec<f64>,
    /// Errors of predictions that landed in another class.
    pub eps0_samples: Vec<f64>,
    /// Half a class width: the largest in-class error of a bin-center
    /// prediction.
    pub resolution: f64,
}

impl AngleErrorReport {
    pub fn accuracy(&self) -> f64 {
        let total = self.eps1_samples.len() + self.eps0_samples.len();
        if total == 0 {
            0.0
        } else {
            self.eps1_samples.len() as f64 / total as f64
        }
    }
}

/// Splits prediction errors by whether the predicted class is correct.
pub fn angle_error_report(predictions: &[f64], truths: &[f64], n_way: usize, span: AngleSpan) -> Result<AngleErrorReport> {
    if predictions.len() != truths.len() {
        return Err(config("predictions and truths differ in length"));
    }
    if n_way == 0 {
        return Err(config("n_way must be positive"));
    }
    let mut report = AngleErrorReport {
        eps1_samples: Vec::new(),
        eps0_samples: Vec::new(),
        resolution: span.width() / (2.0 * n_way as f64),
    };
    for (&p, &t) in predictions.iter().zip(truths) {
        let err = span.error(p, t);
        if span.bin(p, n_way) == span.bin(t, n_way) {
            report.eps1_samples.push(err);
        } else {
            report.eps0_samples.push(err);
        }
    }
    Ok(report)
}

/// Median and percentile summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> ErrorSummary {
    if values.is_empty() {
        return ErrorSummary { count: 0, median: f64::NAN, p90: f64::NAN, max: f64::NAN };
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pick = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    let median = if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    ErrorSummary { count: v.len(), median, p90: pick(0.9), max: v[v.len() - 1] }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.5 + 3.0 * i as f64 / (n - 1) as f64).collect()
    }

    const PROBES: [f64; 4] = [0.0, 0.15, 0.3, 0.45];

    #[test]
    fn conventional_recovers_noiseless_angle() {
        let template = dipole_template(&grid(301), &PROBES);
        let profile = dipole_template(&[0.3], &PROBES).remove(0).1;
        let est = conventional_estimate(&profile, &template).unwrap();
        assert!((est.angle - 0.3).abs() <= 0.01 + 1e-12, "{est:?}");
    }

    #[test]
    fn exact_match_is_infinite_score() {
        let template = dipole_template(&grid(31), &PROBES);
        let (angle, profile) = template[20].clone();
        let est = conventional_estimate(&profile, &template).unwrap();
        assert_eq!(est.angle, angle);
        assert!(est.score.is_infinite());
        assert_eq!(est.multiplicity, 1);
    }

    #[test]
    fn ties_prefer_smaller_magnitude() {
        let template = vec![(0.4, vec![0.0, 1.0]), (-0.2, vec![0.0, 1.0]), (0.1, vec![0.0, 5.0])];
        let est = conventional_estimate(&[3.0, 4.0], &template).unwrap();
        assert_eq!(est.angle, -0.2);
        assert_eq!(est.multiplicity, 2);
    }

    #[test]
    fn constant_offset_is_invisible() {
        let template = dipole_template(&grid(121), &PROBES);
        let base = dipole_template(&[-0.7], &PROBES).remove(0).1;
        let noisy: Vec<f64> = base.iter().enumerate().map(|(i, v)| v + 0.05 * (i as f64).sin()).collect();
        let reference = conventional_estimate(&noisy, &template).unwrap();
        for k in -20..=20 {
            let shifted: Vec<f64> = noisy.iter().map(|v| v + k as f64 * 1.7).collect();
            assert_eq!(conventional_estimate(&shifted, &template).unwrap().angle, reference.angle);
        }
    }

    #[test]
    fn sweep_noiseless_hits_the_null() {
        let truth = IncidentAngle { theta: 0.3, psi: 1.0 };
        let r = sweep_azimuth(&SweepScene::noiseless(truth), &BeamSweepConfig::new(360, 0.3)).unwrap();
        assert!(azimuth_error(r.azimuth, 1.0) <= PI / 360.0 + 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn sweep_axes_and_steering_agree_without_noise() {
        let truth = IncidentAngle { theta: 0.2, psi: 2.2 };
        let scene = SweepScene::noiseless(truth);
        let roll = BeamSweepConfig { steering: Steering::Roll, ..BeamSweepConfig::new(360, 0.2) };
        let r = sweep_azimuth(&scene, &roll).unwrap();
        assert!(azimuth_error(r.azimuth, 2.2) <= PI / 360.0 + 1e-12, "{}", r.azimuth);
    }

    #[test]
    fn two_step_sweep_is_degenerate() {
        let truth = IncidentAngle { theta: 0.1, psi: 2.9 };
        let r = sweep_azimuth(&SweepScene::noiseless(truth), &BeamSweepConfig::new(2, 0.1)).unwrap();
        assert!(r.degenerate);
        assert!(r.azimuth.abs() < 1e-12 || (r.azimuth - PI).abs() < 1e-12);
    }

    #[test]
    fn vertical_steering_gives_a_flat_sweep() {
        let truth = IncidentAngle { theta: 0.1, psi: 1.0 };
        let err = sweep_azimuth(&SweepScene::noiseless(truth), &BeamSweepConfig::new(36, FRAC_PI_2)).unwrap_err();
        assert!(matches!(err, Error::Ambiguous(_)));
    }

    #[test]
    fn frozen_fading_keeps_the_noiseless_answer() {
        let truth = IncidentAngle { theta: 0.05, psi: 4.0 };
        let cfg = BeamSweepConfig::new(360, 0.05);
        let clean = sweep_azimuth(&SweepScene::noiseless(truth), &cfg).unwrap();
        let scene = SweepScene { fading: Some(FadingMode::Frozen), seed: 5, ..SweepScene::noiseless(truth) };
        assert_eq!(sweep_azimuth(&scene, &cfg).unwrap().best, clean.best);
    }

    #[test]
    fn error_report_partitions() {
        let n = 6;
        let truths: Vec<f64> = (0..50).map(|i| -1.5 + 0.06 * i as f64).collect();
        let preds: Vec<f64> = truths
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let b = AngleSpan::Elevation.bin(t, n);
                let b = if i % 3 == 0 { (b + 1) % n } else { b };
                AngleSpan::Elevation.center(b, n)
            })
            .collect();
        let r = angle_error_report(&preds, &truths, n, AngleSpan::Elevation).unwrap();
        assert_eq!(r.eps1_samples.len() + r.eps0_samples.len(), truths.len());
        assert!(r.eps1_samples.iter().all(|&e| e <= r.resolution + 1e-12));
        assert!(r.eps0_samples.iter().all(|&e| e > r.resolution));
        assert!((r.resolution - PI / (2.0 * n as f64)).abs() < 1e-15);
    }

    #[test]
    fn resolution_shrinks_with_classes() {
        let r = |n| angle_error_report(&[], &[], n, AngleSpan::Azimuth).unwrap().resolution;
        assert!((r(10) - PI / 10.0).abs() < 1e-15);
        assert!(r(100_000) < 1e-4);
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.max, 10.0);
        assert_eq!(s.count, 4);
    }
}
