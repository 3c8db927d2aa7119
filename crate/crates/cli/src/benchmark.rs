//! Operator and update timings across grid sizes, pair counts and
//! realizations. Every figure is the median over the configured repetitions.

use std::f64::consts::PI;
use std::time::Instant;

use brt_core::{
    attenuation_update, make_pair, mean_counts, scatter_map, scatter_update, shepp_logan,
    DirectOperator, Image, ImageGrid, ImageKind, MeasurementSet, OperatorOptions, OperatorSet,
    Realization, ScatterVariant, SolverConfig, SourceDetectorPair, SourceModel, WeightPrecision,
};
use serde::Serialize;

use crate::config::BenchmarkConfig;
use crate::error::CliError;

/// Detector angle magnitudes; pairs use them with both signs in this order.
const DETECTOR_ANGLES: [f64; 4] = [PI / 10.0, PI / 8.0, PI / 6.0, PI / 5.0];
pub const MAX_BENCHMARK_PAIRS: usize = 2 * DETECTOR_ANGLES.len();

/// `count` forward-scatter pairs sharing a horizontal source, so every pair
/// admits both realizations.
pub fn benchmark_pairs(count: usize) -> Vec<SourceDetectorPair> {
    DETECTOR_ANGLES
        .iter()
        .flat_map(|&a| [a, -a])
        .take(count)
        .map(|d| make_pair(PI, d))
        .collect()
}

/// Grid with `l1` columns and `l2` rows over the 2 x 1.5 desk extent.
pub fn benchmark_grid(l1: usize, l2: usize) -> Result<ImageGrid, CliError> {
    Ok(ImageGrid::new(l1, l2, 2.0 / l1 as f64, 1.5 / l2 as f64)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub pixels: usize,
    pub pairs: usize,
    pub op: Realization,
    pub setup_s: f64,
    /// `B_i mu` for every pair.
    pub forward_s: f64,
    /// Two back-projections per pair, as one attenuation update needs.
    pub adjoint_s: f64,
    pub scatter_update_s: f64,
    pub attenuation_update_s: f64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct Skipped {
    pub pixels: usize,
    pub pairs: usize,
    pub op: Realization,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub skipped: Vec<Skipped>,
}

impl BenchReport {
    pub fn find(&self, pixels: usize, pairs: usize, op: Realization) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.pixels == pixels && r.pairs == pairs && r.op == op)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

/// Estimated weight storage of the direct realization, in bytes.
pub fn direct_footprint(grid: &ImageGrid, pairs: &[SourceDetectorPair], precision: WeightPrecision) -> f64 {
    let nnz: usize = pairs.iter().map(|p| DirectOperator::estimate_nnz(grid, p)).sum();
    (nnz * DirectOperator::bytes_per_nonzero(precision)) as f64
}

pub fn run_benchmark(
    cfg: &BenchmarkConfig,
    mut progress: impl FnMut(&str),
) -> Result<BenchReport, CliError> {
    if let Some(&c) = cfg.pair_counts.iter().find(|&&c| c > MAX_BENCHMARK_PAIRS) {
        return Err(CliError::Config(format!(
            "benchmark.pair_counts: {c} exceeds the {MAX_BENCHMARK_PAIRS} available pairs"
        )));
    }
    let workers = rayon::current_num_threads();
    let mut report = BenchReport::default();
    for &[l1, l2] in &cfg.sizes {
        let grid = benchmark_grid(l1, l2)?;
        let n = grid.len();
        let mu = shepp_logan(&grid, 1.0);
        let alpha = scatter_map(&mu, ScatterVariant::Positive)?;
        let alpha0 = Image::constant(grid, 0.5, ImageKind::Scatter)?;
        let mu0 = Image {
            values: mu.values.iter().map(|v| 0.5 * v).collect(),
            ..mu.clone()
        };
        for &count in &cfg.pair_counts {
            let pairs = benchmark_pairs(count);
            for &op in &cfg.realizations {
                let precision = if n >= cfg.single_precision_from_pixels {
                    WeightPrecision::Single
                } else {
                    WeightPrecision::Double
                };
                if op == Realization::Direct {
                    let bytes = direct_footprint(&grid, &pairs, precision);
                    if bytes > cfg.memory_budget_gb * 1e9 {
                        let reason = format!(
                            "estimated {:.2} GB of weights exceeds the {:.2} GB budget",
                            bytes / 1e9,
                            cfg.memory_budget_gb
                        );
                        progress(&format!("skip {n} px, {count} pairs, {op}: {reason}"));
                        report.skipped.push(Skipped { pixels: n, pairs: count, op, reason });
                        continue;
                    }
                }
                progress(&format!("run {n} px, {count} pairs, {op}"));
                let opts = OperatorOptions {
                    realization: op,
                    precision,
                    ..Default::default()
                };
                let row = time_row(&grid, &pairs, opts, &alpha, &mu, &alpha0, &mu0, cfg.repetitions)?;
                report.rows.push(BenchRow {
                    pixels: n,
                    pairs: count,
                    op,
                    workers,
                    ..row
                });
            }
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn time_row(
    grid: &ImageGrid,
    pairs: &[SourceDetectorPair],
    opts: OperatorOptions,
    alpha: &Image,
    mu: &Image,
    alpha0: &Image,
    mu0: &Image,
    repetitions: usize,
) -> Result<BenchRow, CliError> {
    let solver = SolverConfig {
        lambda_alpha: 2e-3,
        lambda_mu: 2e-3,
        ..Default::default()
    };
    let mut ms: Option<MeasurementSet> = None;
    let mut samples: [Vec<f64>; 5] = Default::default();
    for _ in 0..repetitions {
        let (ops, setup) = timed(|| OperatorSet::build(grid, pairs, opts));
        let ops = ops?;
        if ms.is_none() {
            let source = SourceModel::uniform(grid, pairs.len(), 350.0, 17.5)?;
            let empty = vec![vec![0.0; grid.len()]; pairs.len()];
            let ms0 = MeasurementSet::new(*grid, pairs.to_vec(), empty, source)?;
            let g = mean_counts(alpha, mu, &ms0, &ops)?;
            ms = Some(MeasurementSet::new(*grid, pairs.to_vec(), g.g, ms0.source)?);
        }
        let ms = ms.as_ref().expect("initialized above");
        let (proj, forward) = timed(|| ops.forward_all(&mu.values));
        let (_, adjoint) = timed(|| ops.adjoint_sum(&proj, &proj));
        let (a1, scatter) = timed(|| scatter_update(alpha0, mu0, ms, &ops, &solver));
        let a1 = a1?;
        let (m1, atten) = timed(|| attenuation_update(&a1, mu0, ms, &ops, &solver));
        m1?;
        for (s, v) in samples.iter_mut().zip([setup, forward, adjoint, scatter, atten]) {
            s.push(v);
        }
    }
    let [setup, forward, adjoint, scatter, atten] = samples.map(median);
    Ok(BenchRow {
        pixels: grid.len(),
        pairs: pairs.len(),
        op: opts.realization,
        setup_s: setup,
        forward_s: forward,
        adjoint_s: adjoint,
        scatter_update_s: scatter,
        attenuation_update_s: atten,
        workers: 0,
    })
}

pub fn write_csv(path: &std::path::Path, rows: &[BenchRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
