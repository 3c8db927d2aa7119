use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brt_cli::benchmark::{self, run_benchmark};
use brt_cli::commands::{self, ReconstructOptions};
use brt_cli::config::{BenchmarkConfig, ExperimentConfig};
use brt_cli::io;
use brt_cli::CliError;
use brt_core::{EstimationMode, ImageKind, Realization};
use clap::{Args, Parser, Subcommand};

/// Broken ray transform reconstruction from single-scatter data.
#[derive(Parser)]
#[command(name = "brt", version)]
struct Cli {
    /// Worker threads; falls back to BRT_WORKERS, then to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Operator realization, overriding the configuration.
    #[arg(long)]
    operator: Option<Realization>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(op) = self.operator {
            cfg.operator.realization = op;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the attenuation and scatter phantoms.
    Phantom {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate counts for every configured pair.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output measurement file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Attenuation image; with --alpha, data come from the discrete operators.
        #[arg(long, requires = "alpha")]
        mu: Option<PathBuf>,
        #[arg(long, requires = "mu")]
        alpha: Option<PathBuf>,
    },
    /// Joint scatter/attenuation estimation.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Measurement file.
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Keep the attenuation fixed at its initial value (scatter-only estimation).
        #[arg(long, conflicts_with = "freeze_scatter")]
        freeze_attenuation: bool,
        /// Keep the scatter fixed at its initial value (attenuation-only estimation).
        #[arg(long)]
        freeze_scatter: bool,
        #[arg(long)]
        init_mu: Option<PathBuf>,
        #[arg(long)]
        init_alpha: Option<PathBuf>,
        /// Ground truth for the SSIM report.
        #[arg(long, requires = "truth_alpha")]
        truth_mu: Option<PathBuf>,
        #[arg(long, requires = "truth_mu")]
        truth_alpha: Option<PathBuf>,
    },
    /// Log-domain baseline scatter estimate.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Attenuation estimate to undo; zero when omitted.
        #[arg(long)]
        mu: Option<PathBuf>,
        #[arg(long)]
        truth_alpha: Option<PathBuf>,
    },
    /// Operator and update timings, written as CSV.
    Benchmark {
        /// Configuration whose [benchmark] table is used; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

fn init_workers(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("BRT_WORKERS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                CliError::Config(format!("BRT_WORKERS must be a positive integer, got '{v}'"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("worker count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?;
    }
    Ok(())
}

fn image_arg(
    path: &Option<PathBuf>,
    kind: ImageKind,
    cfg: &ExperimentConfig,
) -> Result<Option<brt_core::Image>, CliError> {
    let grid = cfg.image_grid()?;
    path.as_deref()
        .map(|p| io::read_image_expecting(p, kind, &grid))
        .transpose()
}

fn print_report(path: &Path, report: &impl serde::Serialize) {
    if let Ok(text) = toml::to_string(report) {
        print!("{text}");
    }
    eprintln!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_workers(cli.workers)?;
    match cli.command {
        Command::Phantom { common, out } => {
            let cfg = common.load()?;
            commands::phantom(&cfg, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Simulate { common, out, seed, mu, alpha } => {
            let cfg = common.load()?;
            let mu = image_arg(&mu, ImageKind::Attenuation, &cfg)?;
            let alpha = image_arg(&alpha, ImageKind::Scatter, &cfg)?;
            let images = alpha.as_ref().zip(mu.as_ref());
            let ms = commands::simulate(&cfg, images, seed.unwrap_or(cfg.simulation.seed))?;
            io::write_measurements(&out, &ms)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Reconstruct {
            common,
            data,
            out,
            freeze_attenuation,
            freeze_scatter,
            init_mu,
            init_alpha,
            truth_mu,
            truth_alpha,
        } => {
            let cfg = common.load()?;
            let ms = io::read_measurements(&data)?;
            let mode = match (freeze_attenuation, freeze_scatter) {
                (true, _) => EstimationMode::ScatterOnly,
                (_, true) => EstimationMode::AttenuationOnly,
                _ => cfg.solver.mode,
            };
            let truth = match (
                image_arg(&truth_alpha, ImageKind::Scatter, &cfg)?,
                image_arg(&truth_mu, ImageKind::Attenuation, &cfg)?,
            ) {
                (Some(a), Some(m)) => Some((a, m)),
                _ => None,
            };
            let opts = ReconstructOptions {
                mode,
                init_alpha: image_arg(&init_alpha, ImageKind::Scatter, &cfg)?,
                init_mu: image_arg(&init_mu, ImageKind::Attenuation, &cfg)?,
                truth,
            };
            let (result, report) = commands::reconstruct(&cfg, &ms, &opts, |e| {
                if e.iter % 10 == 0 && e.half != brt_core::Half::Scatter {
                    eprintln!("iter {:>4} {:<11} J = {:.10e}", e.iter, e.half.as_str(), e.objective.total);
                }
            })?;
            commands::write_reconstruction(&out, &result, &report)?;
            print_report(&out, &report);
        }
        Command::Baseline { common, data, out, mu, truth_alpha } => {
            let cfg = common.load()?;
            let ms = io::read_measurements(&data)?;
            let mu = image_arg(&mu, ImageKind::Attenuation, &cfg)?;
            let truth = image_arg(&truth_alpha, ImageKind::Scatter, &cfg)?;
            let b = commands::baseline(&cfg, &ms, mu.as_ref(), truth.as_ref())?;
            commands::write_baseline(&out, &b)?;
            if let Some(s) = b.ssim_alpha {
                println!("ssim_alpha = {s}");
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Benchmark { config, out, repetitions } => {
            let mut cfg = match config {
                Some(p) => BenchmarkConfig::load(&p)?,
                None => BenchmarkConfig::default(),
            };
            if let Some(r) = repetitions {
                cfg.repetitions = r;
                cfg.validate()?;
            }
            let report = run_benchmark(&cfg, |msg| eprintln!("{msg}"))?;
            benchmark::write_csv(&out, &report.rows)?;
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
