#![allow(dead_code)]

use std::f64::consts::PI;

use brt_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random problem: two scatter pairs sharing a source plus one
/// transmission pair, Poisson data drawn around the model means.
pub struct Instance {
    pub grid: ImageGrid,
    pub ms: MeasurementSet,
    pub ops: OperatorSet,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
}

pub fn random_instance(seed: u64, realization: Realization) -> Instance {
    let grid = ImageGrid::new(16, 16, 0.0625, 0.0625).unwrap();
    let pairs = vec![
        make_pair(PI, PI / 10.0),
        make_pair(PI, -PI / 10.0),
        make_pair(PI, 0.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    let mu: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..2.0)).collect();
    let source = SourceModel::uniform(&grid, pairs.len(), 300.0, 15.0).unwrap();
    let ops = OperatorSet::build(
        &grid,
        &pairs,
        OperatorOptions {
            realization,
            ..Default::default()
        },
    )
    .unwrap();
    let empty = vec![vec![0.0; grid.len()]; pairs.len()];
    let ms0 = MeasurementSet::new(grid, pairs.clone(), empty, source.clone()).unwrap();
    let alpha_img = Image::new(grid, alpha.clone(), ImageKind::Scatter).unwrap();
    let mu_img = Image::new(grid, mu.clone(), ImageKind::Attenuation).unwrap();
    let g = mean_counts(&alpha_img, &mu_img, &ms0, &ops).unwrap();
    let d = simulate(&g, seed);
    let ms = MeasurementSet::new(grid, pairs, d, source).unwrap();
    Instance {
        grid,
        ms,
        ops,
        alpha,
        mu,
    }
}

pub fn image(grid: ImageGrid, values: &[f64], kind: ImageKind) -> Image {
    Image::new(grid, values.to_vec(), kind).unwrap()
}

/// `I(d || g(alpha, mu))` on the instance data.
pub fn divergence(inst: &Instance, alpha: &[f64], mu: &[f64]) -> f64 {
    let g = mean_counts(
        &image(inst.grid, alpha, ImageKind::Scatter),
        &image(inst.grid, mu, ImageKind::Attenuation),
        &inst.ms,
        &inst.ops,
    )
    .unwrap();
    i_divergence(&inst.ms.d, &g.g).unwrap()
}

/// `|a - b| <= tol * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}
