//! Subcommand implementations. Each takes already-parsed inputs so the same
//! code paths serve the binary, the integration tests and the acceptance run.

use std::path::{Path, PathBuf};

use brt_core::{
    baseline_preprocess, baseline_scatter, joint_estimate, mean_counts, mean_counts_analytic,
    scatter_map, shepp_logan, simulate as draw_poisson, ssim, EstimationMode, Image, ImageGrid,
    ImageKind, MeasurementSet, OperatorSet, PhantomDescription, ReconResult, SolverConfig,
    TraceEntry,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, PhantomConfig};
use crate::error::CliError;
use crate::io;

/// Ground-truth images and the analytic description of the attenuation.
pub struct Truth {
    pub alpha: Image,
    pub mu: Image,
    pub description: PhantomDescription,
}

pub fn truth(cfg: &ExperimentConfig) -> Result<Truth, CliError> {
    let grid = cfg.image_grid()?;
    let unit = cfg.unit_phantom()?;
    let max_mu = cfg.max_mu();
    let (unit_img, mu) = match cfg.phantom {
        PhantomConfig::SheppLogan { .. } => (shepp_logan(&grid, 1.0), shepp_logan(&grid, max_mu)),
        _ => {
            let scaled = PhantomDescription {
                scale: max_mu,
                ..unit.clone()
            };
            (unit.render(&grid), scaled.render(&grid))
        }
    };
    let alpha = scatter_map(&unit_img, cfg.scatter.variant)?;
    Ok(Truth {
        alpha,
        mu,
        description: PhantomDescription {
            scale: max_mu,
            ..unit
        },
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_with_preview(dir: &Path, stem: &str, img: &Image) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{stem}.brti"));
    io::write_image(&path, img)?;
    io::write_pgm(&dir.join(format!("{stem}.pgm")), img)?;
    Ok(path)
}

/// Writes `mu.brti` and `alpha.brti` (plus PGM previews) into `out`.
pub fn phantom(cfg: &ExperimentConfig, out: &Path) -> Result<Truth, CliError> {
    create_dir(out)?;
    let t = truth(cfg)?;
    write_with_preview(out, "mu", &t.mu)?;
    write_with_preview(out, "alpha", &t.alpha)?;
    Ok(t)
}

pub fn build_operators(cfg: &ExperimentConfig, grid: &ImageGrid) -> Result<OperatorSet, CliError> {
    Ok(OperatorSet::build(grid, &cfg.source_pairs(), cfg.operator.options())?)
}

/// Measurement set with empty data, used to evaluate the forward model.
fn empty_measurements(cfg: &ExperimentConfig) -> Result<MeasurementSet, CliError> {
    let grid = cfg.image_grid()?;
    let pairs = cfg.source_pairs();
    let empty = vec![vec![0.0; grid.len()]; pairs.len()];
    Ok(MeasurementSet::new(grid, pairs, empty, cfg.source_model()?)?)
}

/// Simulated counts. With `images` the means come from the discrete
/// operators applied to those images; otherwise from the analytic phantom,
/// so the data carry no discretization error in the exponent.
pub fn simulate(
    cfg: &ExperimentConfig,
    images: Option<(&Image, &Image)>,
    seed: u64,
) -> Result<MeasurementSet, CliError> {
    let ms0 = empty_measurements(cfg)?;
    let g = match images {
        Some((alpha, mu)) => {
            let ops = build_operators(cfg, &ms0.grid)?;
            mean_counts(alpha, mu, &ms0, &ops)?
        }
        None => {
            let t = truth(cfg)?;
            mean_counts_analytic(&t.alpha, &t.description, &ms0)?
        }
    };
    let d = if cfg.simulation.noisy {
        draw_poisson(&g, seed)
    } else {
        g.g
    };
    Ok(MeasurementSet::new(ms0.grid, ms0.pairs, d, ms0.source)?)
}

/// Checks that a measurement file was produced for this configuration.
pub fn check_measurements(cfg: &ExperimentConfig, ms: &MeasurementSet) -> Result<(), CliError> {
    let grid = cfg.image_grid()?;
    if ms.grid != grid {
        return Err(CliError::Data(format!(
            "measurement grid {} does not match the configured grid {}",
            ms.grid.describe(),
            grid.describe()
        )));
    }
    if ms.pairs != cfg.source_pairs() {
        return Err(CliError::Data(
            "measurement pairs do not match the configured pairs".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ReconstructOptions {
    pub mode: EstimationMode,
    pub init_alpha: Option<Image>,
    pub init_mu: Option<Image>,
    /// Ground truth for the SSIM report.
    pub truth: Option<(Image, Image)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconReport {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub i_div: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_mu: Option<f64>,
}

pub fn reconstruct(
    cfg: &ExperimentConfig,
    ms: &MeasurementSet,
    opts: &ReconstructOptions,
    progress: impl FnMut(&TraceEntry),
) -> Result<(ReconResult, ReconReport), CliError> {
    check_measurements(cfg, ms)?;
    let grid = ms.grid;
    let ops = build_operators(cfg, &grid)?;
    let alpha0 = match &opts.init_alpha {
        Some(a) => a.clone(),
        None => Image::constant(grid, cfg.reconstruction.init_alpha, ImageKind::Scatter)?,
    };
    let mu0 = match &opts.init_mu {
        Some(m) => m.clone(),
        None => Image::constant(grid, cfg.reconstruction.init_mu, ImageKind::Attenuation)?,
    };
    let solver = SolverConfig {
        mode: opts.mode,
        ..cfg.solver
    };
    let result = joint_estimate(&alpha0, &mu0, ms, &ops, &solver, progress)?;
    let last = result.trace.last().expect("trace holds the initial entry");
    let (ssim_alpha, ssim_mu) = match &opts.truth {
        Some((a, m)) => (Some(ssim(&result.alpha, a)?), Some(ssim(&result.mu, m)?)),
        None => (None, None),
    };
    let report = ReconReport {
        iterations: result.iterations,
        converged: result.converged,
        objective: last.objective.total,
        i_div: last.objective.i_div,
        ssim_alpha,
        ssim_mu,
    };
    Ok((result, report))
}

pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "half", "J", "I_div", "R_alpha", "R_mu", "wall_ms"])?;
    for e in trace {
        w.write_record([
            e.iter.to_string(),
            e.half.as_str().to_string(),
            format!("{:.17e}", e.objective.total),
            format!("{:.17e}", e.objective.i_div),
            format!("{:.17e}", e.objective.r_alpha),
            format!("{:.17e}", e.objective.r_mu),
            format!("{:.3}", e.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Writes `alpha`, `mu`, `trace.csv` and `report.toml` into `out`.
pub fn write_reconstruction(
    out: &Path,
    result: &ReconResult,
    report: &ReconReport,
) -> Result<(), CliError> {
    create_dir(out)?;
    write_with_preview(out, "alpha", &result.alpha)?;
    write_with_preview(out, "mu", &result.mu)?;
    write_trace(&out.join("trace.csv"), &result.trace)?;
    write_toml(&out.join("report.toml"), report)
}

fn write_toml(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = toml::to_string(value).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub struct BaselineOutput {
    /// Log data `ln I0 - ln dbar_i` per pair.
    pub bhat: Vec<Image>,
    pub alpha: Image,
    pub ssim_alpha: Option<f64>,
}

/// Log-domain baseline. Without `mu_hat` the attenuation is taken as zero,
/// which yields the attenuated-scatter image.
pub fn baseline(
    cfg: &ExperimentConfig,
    ms: &MeasurementSet,
    mu_hat: Option<&Image>,
    truth_alpha: Option<&Image>,
) -> Result<BaselineOutput, CliError> {
    check_measurements(cfg, ms)?;
    let grid = ms.grid;
    let ops = build_operators(cfg, &grid)?;
    let mut dbar = Vec::with_capacity(ms.n_pairs());
    let mut bhat = Vec::with_capacity(ms.n_pairs());
    for i in 0..ms.n_pairs() {
        let (d, b) = baseline_preprocess(&ms.d[i], &ms.source.beta[i], &ms.source.i0, cfg.baseline.d0);
        dbar.push(d);
        bhat.push(Image::new(grid, b, ImageKind::Data)?);
    }
    let zero = Image::zeros(grid, ImageKind::Attenuation);
    let alpha = baseline_scatter(&dbar, mu_hat.unwrap_or(&zero), ms, &ops)?;
    let ssim_alpha = truth_alpha.map(|t| ssim(&alpha, t)).transpose()?;
    Ok(BaselineOutput {
        bhat,
        alpha,
        ssim_alpha,
    })
}

pub fn write_baseline(out: &Path, b: &BaselineOutput) -> Result<(), CliError> {
    create_dir(out)?;
    for (i, img) in b.bhat.iter().enumerate() {
        write_with_preview(out, &format!("bhat_{i}"), img)?;
    }
    write_with_preview(out, "alpha", &b.alpha)?;
    if let Some(s) = b.ssim_alpha {
        write_toml(&out.join("report.toml"), &BaselineReport { ssim_alpha: s })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineReport {
    ssim_alpha: f64,
}
