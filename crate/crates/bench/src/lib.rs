//! Fixtures shared by the criterion benches: desk-extent grids (2 x 1.5)
//! with a Shepp-Logan attenuation and noise-free data.

use std::f64::consts::PI;

use brt_core::{
    make_pair, mean_counts, scatter_map, shepp_logan, Image, ImageGrid, ImageKind,
    MeasurementSet, OperatorOptions, OperatorSet, Realization, ScatterVariant, SourceDetectorPair,
    SourceModel,
};

pub fn desk_grid(l1: usize, l2: usize) -> ImageGrid {
    ImageGrid::new(l1, l2, 2.0 / l1 as f64, 1.5 / l2 as f64).expect("positive sizes")
}

/// Forward-scatter pairs sharing a horizontal source, so both realizations apply.
pub fn pairs(count: usize) -> Vec<SourceDetectorPair> {
    [PI / 10.0, PI / 8.0, PI / 6.0, PI / 5.0]
        .iter()
        .flat_map(|&a| [a, -a])
        .take(count)
        .map(|d| make_pair(PI, d))
        .collect()
}

pub struct Problem {
    pub ms: MeasurementSet,
    pub ops: OperatorSet,
    pub alpha: Image,
    pub mu: Image,
    /// Starting point for single updates.
    pub alpha0: Image,
    pub mu0: Image,
}

pub fn problem(l1: usize, l2: usize, count: usize, realization: Realization) -> Problem {
    let grid = desk_grid(l1, l2);
    let pairs = pairs(count);
    let mu = shepp_logan(&grid, 1.0);
    let alpha = scatter_map(&mu, ScatterVariant::Positive).expect("unit phantom");
    let opts = OperatorOptions {
        realization,
        ..Default::default()
    };
    let ops = OperatorSet::build(&grid, &pairs, opts).expect("supported pairs");
    let source = SourceModel::uniform(&grid, count, 350.0, 17.5).expect("valid source");
    let empty = vec![vec![0.0; grid.len()]; count];
    let ms0 = MeasurementSet::new(grid, pairs.clone(), empty, source.clone()).expect("shapes match");
    let g = mean_counts(&alpha, &mu, &ms0, &ops).expect("valid images");
    let ms = MeasurementSet::new(grid, pairs, g.g, source).expect("shapes match");
    let alpha0 = Image::constant(grid, 0.5, ImageKind::Scatter).expect("in range");
    let mu0 = Image {
        values: mu.values.iter().map(|v| 0.5 * v).collect(),
        ..mu.clone()
    };
    Problem {
        ms,
        ops,
        alpha,
        mu,
        alpha0,
        mu0,
    }
}
