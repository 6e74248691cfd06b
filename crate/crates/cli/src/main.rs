use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use threedpm_cli::config::SweepFading;
use threedpm_cli::commands::{self, BoundOutput, BoundQuery, GenOptions};
use threedpm_cli::{CliError, Result, RunConfig};
use threedpm_meta::Algorithm;

#[derive(Parser)]
#[command(name = "threedpm", version, about = "3-D polarization-mismatch simulator and few-shot angle estimation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Validate and report what would run without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Maml,
    Fomaml,
    Cnn,
}

impl From<Method> for Algorithm {
    fn from(m: Method) -> Self {
        match m {
            Method::Maml => Algorithm::Maml,
            Method::Fomaml => Algorithm::Fomaml,
            Method::Cnn => Algorithm::Cnn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Fading {
    None,
    Frozen,
    Redrawn,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the RSS dataset.
    Gen {
        /// Also write a CSV copy next to the binary file.
        #[arg(long)]
        csv: bool,
        /// Generate the single-SNR evaluation dataset instead.
        #[arg(long)]
        eval_snr: Option<f64>,
    },
    /// Train a model on the generated dataset.
    Train {
        #[arg(long, value_enum, default_value = "maml")]
        method: Method,
        /// Dataset file; `<out>/dataset.3dpm` when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on test-side tasks.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "maml")]
        method: Method,
        /// SNR list `a,b,c` or range `start:stop:step`, dB.
        #[arg(long)]
        snr: Option<String>,
        /// Evaluate on this dataset instead of generating one per SNR.
        #[arg(long)]
        eval_dataset: Option<PathBuf>,
    },
    /// Sample-size and confidence bounds.
    Bound {
        #[arg(long, allow_negative_numbers = true)]
        epsilon: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        /// Write the confidence curves up to this many samples.
        #[arg(long)]
        sweep: Option<u64>,
        /// Accuracy of the synthetic classifier in the sweep.
        #[arg(long, default_value_t = 0.75)]
        accuracy: f64,
    },
    /// Azimuth estimation by beam sweep.
    Azimuth {
        /// Elevation the antenna is steered to, radians.
        #[arg(long, allow_negative_numbers = true)]
        theta_est: Option<f64>,
        /// Beam samples per revolution.
        #[arg(long)]
        steps: Option<usize>,
        /// True azimuth, radians.
        #[arg(long, allow_negative_numbers = true)]
        psi: Option<f64>,
        #[arg(long, value_enum)]
        fading: Option<Fading>,
    },
    /// Conventional differential-RSS elevation estimator.
    Baseline,
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    emit(&s)
}

/// Writes a line to stdout, treating a closed pipe as success.
fn emit(s: &str) -> Result<()> {
    match writeln!(std::io::stdout(), "{s}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.resolve(cli.common.seed, cli.common.out.clone())?;
    let dry = cli.common.dry_run;
    if dry && !matches!(cli.command, Command::Gen { .. }) {
        return emit(&format!("configuration valid (hash {})", cfg.hash()));
    }
    match cli.command {
        Command::Gen { csv, eval_snr } => {
            print_json(&commands::cmd_gen(&cfg, &GenOptions { dry_run: dry, csv, eval_snr })?)
        }
        Command::Train { method, dataset } => print_json(&commands::cmd_train(&cfg, method.into(), dataset.as_deref())?),
        Command::Eval { checkpoint, method, snr, eval_dataset } => {
            let grid = match snr {
                Some(s) => commands::parse_snr_grid(&s)?,
                None => cfg.eval.snr_db.clone(),
            };
            print_json(&commands::cmd_eval(&cfg, &checkpoint, &grid, method.into(), eval_dataset.as_deref())?)
        }
        Command::Bound { epsilon, alpha, n, sweep, accuracy } => {
            let query = match (epsilon, alpha, n, sweep) {
                (_, _, _, Some(max_n)) => BoundQuery::Sweep { max_n, accuracy },
                (Some(epsilon), Some(alpha), None, None) => BoundQuery::MinSamples { epsilon, alpha },
                (Some(epsilon), None, Some(n), None) => BoundQuery::Poc { epsilon, n },
                (None, None, None, None) => BoundQuery::Table,
                _ => {
                    return Err(CliError::Validation(
                        "bound takes --epsilon with one of --alpha or --n, --sweep, or no arguments".into(),
                    ))
                }
            };
            match commands::cmd_bound(&cfg, &query)? {
                BoundOutput::Samples(n) => emit(&n.to_string())?,
                BoundOutput::Poc(p) => emit(&p.to_string())?,
                BoundOutput::Table(rows) => {
                    let mut text = String::from("epsilon,alpha,n");
                    for r in rows {
                        text += &format!("\n{},{},{}", r.epsilon, r.alpha, r.n);
                    }
                    emit(&text)?;
                }
                BoundOutput::Sweep(rows, path) => emit(&format!("{} rows written to {}", rows.len(), path.display()))?,
            }
            Ok(())
        }
        Command::Azimuth { theta_est, steps, psi, fading } => {
            let mut cfg = cfg;
            let az = &mut cfg.azimuth;
            az.theta_est = theta_est.or(az.theta_est);
            az.steps = steps.unwrap_or(az.steps);
            az.psi = psi.unwrap_or(az.psi);
            if let Some(f) = fading {
                az.fading = match f {
                    Fading::None => SweepFading::None,
                    Fading::Frozen => SweepFading::Frozen,
                    Fading::Redrawn => SweepFading::Redrawn,
                };
            }
            cfg.validate()?;
            let s = commands::cmd_azimuth(&cfg)?;
            let json = serde_json::to_string_pretty(&s).map_err(|e| CliError::Io(e.to_string()))?;
            std::fs::write(cfg.output_dir.join("azimuth.json"), &json)?;
            emit(&json)
        }
        Command::Baseline => print_json(&commands::cmd_baseline(&cfg)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("THREEDPM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
