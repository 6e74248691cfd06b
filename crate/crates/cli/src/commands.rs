//! One function per subcommand. Each writes its artifacts under the
//! configured output directory and returns a summary for printing.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use threedpm::bounds::{empirical_point_probability, min_samples, poc};
use threedpm::channel::{draw_rician_tap, to_db, ChannelParams, IncidentAngle};
use threedpm::dataset::{generate, split, RssDataset};
use threedpm::estimate::{
    angle_error_report, azimuth_error, conventional_estimate, dipole_template, summarize, sweep_azimuth, AngleSpan,
    BeamSweepConfig, ErrorSummary, SweepScene,
};
use threedpm::rng::{derive_seed, rng_for};
use threedpm_meta::{cnn_train, evaluate, meta_train, Algorithm, MetaConfig, MetaError, Model, TrainLog};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

const AZIMUTH_STREAM: u64 = 0x617a;
const BASELINE_STREAM: u64 = 0x6261;
const BOUND_STREAM: u64 = 0x626f;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenSummary {
    pub records: usize,
    pub feature_len: usize,
    pub kappas: usize,
    pub bins: usize,
    pub instances_per_bin: usize,
    /// Payload checksum, hex; absent on a dry run.
    pub checksum: Option<String>,
    pub path: Option<PathBuf>,
    pub config_hash: String,
}

/// Options of `gen`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenOptions {
    pub dry_run: bool,
    pub csv: bool,
    /// Generate the evaluation dataset at this SNR instead of the training
    /// dataset.
    pub eval_snr: Option<f64>,
}

pub fn dataset_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("dataset.3dpm")
}

pub fn eval_dataset_path(cfg: &RunConfig, snr_db: f64) -> PathBuf {
    cfg.output_dir.join(format!("eval_{snr_db}dB.3dpm"))
}

pub fn cmd_gen(cfg: &RunConfig, opts: &GenOptions) -> Result<GenSummary> {
    let (dcfg, path) = match opts.eval_snr {
        Some(snr) => (cfg.eval_dataset_config(snr), eval_dataset_path(cfg, snr)),
        None => (cfg.dataset.clone(), dataset_path(cfg)),
    };
    dcfg.validate()?;
    let mut summary = GenSummary {
        records: dcfg.records(),
        feature_len: dcfg.feature_len,
        kappas: dcfg.kappa_list.len(),
        bins: dcfg.angle_bins,
        instances_per_bin: dcfg.instances_per_bin,
        checksum: None,
        path: None,
        config_hash: cfg.hash(),
    };
    if opts.dry_run {
        return Ok(summary);
    }
    ensure_dir(&cfg.output_dir)?;
    let ds = generate(&dcfg)?;
    ds.save(&path)?;
    if opts.csv {
        let file = fs::File::create(path.with_extension("csv"))?;
        ds.write_csv(std::io::BufWriter::new(file))?;
    }
    summary.checksum = Some(format!("{:016x}", ds.checksum()));
    summary.path = Some(path.clone());
    let manifest = serde_json::json!({ "summary": &summary, "dataset": &dcfg });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path.with_extension("json"), text)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub algorithm: Algorithm,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub epochs: usize,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub grad_calls: u64,
    pub hvp_calls: u64,
    pub mean_epoch_seconds: f64,
    pub config_hash: String,
}

fn load_dataset(path: &Path) -> Result<RssDataset> {
    if !path.exists() {
        return Err(CliError::Io(format!("dataset {} not found; run `gen` first", path.display())));
    }
    Ok(RssDataset::load(path)?)
}

fn write_log(path: &Path, log: &TrainLog) -> Result<()> {
    log.write_csv(std::io::BufWriter::new(fs::File::create(path)?))?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, algo: Algorithm, dataset: Option<&Path>) -> Result<TrainSummary> {
    let ds = load_dataset(&dataset.map(Path::to_path_buf).unwrap_or_else(|| dataset_path(cfg)))?;
    ensure_dir(&cfg.output_dir)?;
    let checkpoint = cfg.output_dir.join(format!("{}.ckpt", algo.name()));
    let log_path = cfg.output_dir.join(format!("{}_train.csv", algo.name()));
    let meta = MetaConfig { first_order: algo == Algorithm::Fomaml, ..cfg.meta.clone() };
    info!("training {} for {} epochs on {} records", algo.name(), meta.epochs, ds.len());
    let result = match algo {
        Algorithm::Cnn => cnn_train(&ds, &meta),
        _ => meta_train(&ds, &meta),
    };
    let (model, log) = match result {
        Ok(v) => v,
        Err(MetaError::Diverged { epoch, loss, log }) => {
            write_log(&log_path, &log)?;
            return Err(CliError::Numerical(format!(
                "training diverged at epoch {epoch} (loss {loss}); partial log in {}",
                log_path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    model.save(&checkpoint)?;
    write_log(&log_path, &log)?;
    let last = log.rows.last();
    Ok(TrainSummary {
        algorithm: algo,
        checkpoint,
        log: log_path,
        epochs: log.rows.len(),
        final_loss: last.map(|r| r.loss),
        final_accuracy: last.map(|r| r.accuracy),
        grad_calls: log.grad_calls,
        hvp_calls: log.hvp_calls,
        mean_epoch_seconds: log.mean_epoch_seconds(),
        config_hash: cfg.hash(),
    })
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub method: String,
    pub n_way: usize,
    pub k_shot: usize,
    pub snr_db: f64,
    pub accuracy: f64,
    pub episodes: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub path: PathBuf,
}

/// Parses `a:b:c` (start, stop inclusive, step) or a comma list.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Validation(format!("bad SNR grid `{text}`"));
    let nums = |s: &str| s.split([':', ',']).map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>();
    if text.contains(':') {
        let v = nums(text)?;
        let [a, b, step] = v[..] else { return Err(bad()) };
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + step * i as f64).collect())
    } else {
        nums(text)
    }
}

/// Evaluates a checkpoint on test-side tasks at each SNR. The CNN
/// baseline classifies queries directly; meta-models are fine-tuned on
/// each episode's support set first.
pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    snr_grid: &[f64],
    method: Algorithm,
    eval_dataset: Option<&Path>,
) -> Result<EvalReport> {
    if snr_grid.is_empty() {
        return Err(CliError::Validation("empty SNR grid".into()));
    }
    if !checkpoint.exists() {
        return Err(CliError::Io(format!("checkpoint {} not found", checkpoint.display())));
    }
    let model = Model::load(checkpoint)?;
    if model.arch.n_way != cfg.meta.n_way {
        return Err(CliError::Validation(format!(
            "checkpoint is {}-way but the configuration asks for {}-way episodes",
            model.arch.n_way, cfg.meta.n_way
        )));
    }
    let mut meta = cfg.meta.clone();
    if method == Algorithm::Cnn {
        meta.eval_steps = Some(0);
    }
    let mut rows = Vec::with_capacity(snr_grid.len());
    for &snr in snr_grid {
        let ds = match eval_dataset {
            Some(p) => load_dataset(p)?,
            None => generate(&cfg.eval_dataset_config(snr))?,
        };
        let r = evaluate(&model, &ds, &meta, cfg.seed)?;
        rows.push(EvalRow {
            method: method.name().to_string(),
            n_way: meta.n_way,
            k_shot: meta.k_shot,
            snr_db: snr,
            accuracy: r.accuracy,
            episodes: r.episodes,
            seed: cfg.seed,
            config_hash: cfg.hash(),
        });
    }
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("eval_{}.csv", method.name()));
    write_csv(&path, &rows)?;
    Ok(EvalReport { rows, path })
}

/// What `bound` computes.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundQuery {
    /// Smallest sample count for `(ε, α)`.
    MinSamples { epsilon: f64, alpha: f64 },
    /// Probability of confidence for `(ε, n)`.
    Poc { epsilon: f64, n: u64 },
    /// Grid of `(ε, α) → n`.
    Table,
    /// `n,poc,epsilon,point_probability` curves for `n = 1..=max_n`, the
    /// last column a bootstrap estimate from synthetic results of the
    /// given accuracy.
    Sweep { max_n: u64, accuracy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub epsilon: f64,
    pub alpha: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u64,
    pub poc: f64,
    pub epsilon: f64,
    pub point_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundOutput {
    Samples(u64),
    Poc(f64),
    Table(Vec<TableRow>),
    Sweep(Vec<SweepRow>, PathBuf),
}

pub const TABLE_EPSILONS: [f64; 5] = [0.01, 0.05, 0.1, 0.15, 0.25];
pub const TABLE_ALPHAS: [f64; 4] = [0.01, 0.05, 0.1, 0.5];
pub const SWEEP_EPSILONS: [f64; 5] = [0.05, 0.1, 0.15, 0.2, 0.25];

pub fn cmd_bound(cfg: &RunConfig, query: &BoundQuery) -> Result<BoundOutput> {
    match *query {
        BoundQuery::MinSamples { epsilon, alpha } => Ok(BoundOutput::Samples(min_samples(epsilon, alpha)?)),
        BoundQuery::Poc { epsilon, n } => {
            if !(epsilon > 0.0) {
                return Err(CliError::Validation("epsilon must be positive".into()));
            }
            Ok(BoundOutput::Poc(poc(epsilon, n)))
        }
        BoundQuery::Table => {
            let mut rows = Vec::new();
            for &epsilon in &TABLE_EPSILONS {
                for &alpha in &TABLE_ALPHAS {
                    rows.push(TableRow { epsilon, alpha, n: min_samples(epsilon, alpha)? });
                }
            }
            Ok(BoundOutput::Table(rows))
        }
        BoundQuery::Sweep { max_n, accuracy } => {
            if max_n == 0 || !(0.0..=1.0).contains(&accuracy) {
                return Err(CliError::Validation("sweep needs max_n ≥ 1 and accuracy in [0, 1]".into()));
            }
            let cells: Vec<(f64, u64)> =
                SWEEP_EPSILONS.iter().flat_map(|&e| (1..=max_n).map(move |n| (e, n))).collect();
            let rows = cells
                .par_iter()
                .map(|&(epsilon, n)| {
                    let mut rng = rng_for(cfg.seed, &[BOUND_STREAM, n]);
                    let results: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < accuracy)).collect();
                    let seed = derive_seed(cfg.seed, &[BOUND_STREAM, n, epsilon.to_bits()]);
                    let pp = empirical_point_probability(&results, accuracy, epsilon, 200, seed)?;
                    Ok(SweepRow { n, poc: poc(epsilon, n), epsilon, point_probability: pp.two_sided })
                })
                .collect::<Result<Vec<_>>>()?;
            ensure_dir(&cfg.output_dir)?;
            let path = cfg.output_dir.join("bound_sweep.csv");
            write_csv(&path, &rows)?;
            Ok(BoundOutput::Sweep(rows, path))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AzimuthSummary {
    pub estimate: f64,
    pub truth_psi: f64,
    pub error: f64,
    pub degenerate: bool,
    pub steps: usize,
    pub trials: usize,
    pub errors: ErrorSummary,
    pub sweep_csv: PathBuf,
    pub config_hash: String,
}

pub fn cmd_azimuth(cfg: &RunConfig) -> Result<AzimuthSummary> {
    let az = &cfg.azimuth;
    let sweep = BeamSweepConfig {
        steps: az.steps,
        axis: az.axis,
        steering: az.steering,
        theta_est: az.theta_est.unwrap_or(az.theta),
    };
    let channel = ChannelParams { kappa: az.kappa, ..cfg.dataset.channel };
    let results = (0..az.trials)
        .into_par_iter()
        .map(|i| {
            let scene = SweepScene {
                truth: IncidentAngle { theta: az.theta, psi: az.psi },
                channel,
                antenna: cfg.antenna,
                fading: az.fading.mode(),
                noise_db: az.noise_db,
                seed: derive_seed(cfg.seed, &[AZIMUTH_STREAM, i as u64]),
            };
            sweep_azimuth(&scene, &sweep)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let errors: Vec<f64> = results.iter().map(|r| azimuth_error(r.azimuth, az.psi)).collect();
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("sweep.csv");
    write_csv(&path, &results[0].samples)?;
    Ok(AzimuthSummary {
        estimate: results[0].azimuth,
        truth_psi: az.psi,
        error: errors[0],
        degenerate: results[0].degenerate,
        steps: az.steps,
        trials: az.trials,
        errors: summarize(&errors),
        sweep_csv: path,
        config_hash: cfg.hash(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub row: EvalRow,
    pub eps1: ErrorSummary,
    pub eps0: ErrorSummary,
    pub resolution: f64,
    pub path: PathBuf,
}

/// Conventional differential-RSS elevation estimate. Each trial probes a
/// random bin center with the receive antenna tilted by every offset
/// under Rician fading and receiver noise, then matches the profile
/// against the ideal-dipole template over all bin centers.
pub fn cmd_baseline(cfg: &RunConfig) -> Result<BaselineSummary> {
    let d = &cfg.dataset;
    let b = &cfg.baseline;
    let centers: Vec<f64> = (0..d.angle_bins).map(|i| d.bin_center(i)).collect();
    let template = dipole_template(&centers, &b.probe_offsets);
    let kappas = split(d).test_tasks;
    let kappas = if kappas.is_empty() { d.kappa_list.clone() } else { kappas };
    let ant = cfg.antenna;
    let noise_var = threedpm::antenna::DIPOLE_DIRECTIVITY / 10f64.powf(b.snr_db / 10.0);
    let pairs = (0..b.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(cfg.seed, &[BASELINE_STREAM, t as u64]);
            let truth = centers[rng.random_range(0..centers.len())];
            let kappa = kappas[rng.random_range(0..kappas.len())];
            let channel = ChannelParams { kappa: f64::from(kappa), ..d.channel };
            let loss = d.plf_range.0 + (d.plf_range.1 - d.plf_range.0) * rng.random::<f64>();
            let profile: Vec<f64> = b
                .probe_offsets
                .iter()
                .enumerate()
                .map(|(j, &o)| {
                    let amp = (ant.gain_at_elevation(0.0, truth + o, 0) * (1.0 - loss)).sqrt();
                    let h = draw_rician_tap(&channel, 0.0, derive_seed(cfg.seed, &[BASELINE_STREAM, t as u64, j as u64]));
                    let s = (noise_var / 2.0).sqrt();
                    let n = complex_gaussian(rng.random::<f64>(), rng.random::<f64>(), s);
                    to_db((h * amp + n).norm_sqr())
                })
                .collect();
            let est = conventional_estimate(&profile, &template)?;
            Ok((est.angle, truth))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let report = angle_error_report(&pred, &truth, d.angle_bins, AngleSpan::Elevation)?;
    let row = EvalRow {
        method: "conventional".into(),
        n_way: d.angle_bins,
        k_shot: 0,
        snr_db: b.snr_db,
        accuracy: report.accuracy(),
        episodes: b.trials,
        seed: cfg.seed,
        config_hash: cfg.hash(),
    };
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("eval_conventional.csv");
    write_csv(&path, std::slice::from_ref(&row))?;
    Ok(BaselineSummary {
        row,
        eps1: summarize(&report.eps1_samples),
        eps0: summarize(&report.eps0_samples),
        resolution: report.resolution,
        path,
    })
}

/// Circular complex Gaussian sample from two uniforms (Box–Muller).
fn complex_gaussian(u1: f64, u2: f64, sigma: f64) -> Complex64 {
    let r = (-2.0 * (1.0 - u1).ln()).sqrt() * sigma;
    let a = std::f64::consts::TAU * u2;
    Complex64::new(r * a.cos(), r * a.sin())
}
