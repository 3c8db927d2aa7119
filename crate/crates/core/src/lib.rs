//! Broken ray transform operators and joint scatter/attenuation estimation
//! from Poisson single-scatter data.

pub mod baseline;
pub mod error;
pub mod forward_model;
pub mod geometry;
pub mod metrics;
pub mod operators;
pub mod phantoms;
pub mod solver;
pub mod surrogates;

pub use error::{BrtError, Result};
pub use geometry::{
    make_pair, padded_dims, spreading_factors, Direction, Image, ImageGrid, ImageKind,
    SourceDetectorPair,
};
pub use operators::{
    analytic_brt, apply_adjoint, apply_forward, row_sum_max, BrtOperator, DirectOperator,
    FourierOperator, FourierOptions, OperatorOptions, OperatorSet, Realization, SinogramData,
    WeightPrecision,
};
pub use phantoms::{
    rectangle_description, rectangle_phantom, scatter_map, shepp_logan, shepp_logan_description,
    PhantomDescription,
    ScatterVariant, Shape,
};
pub use baseline::{baseline_preprocess, baseline_scatter};
pub use forward_model::{
    analytic_projections, i_divergence, log_likelihood, mean_counts, mean_counts_analytic, objective, simulate, MeanCounts, MeasurementSet,
    ObjectiveValue, SourceModel,
};
pub use metrics::ssim;
pub use solver::{
    attenuation_update, joint_estimate, scatter_update, solve_pixel_1d, EstimationMode, Half,
    ReconResult, SolverConfig, TraceEntry,
};
pub use surrogates::Neighborhood;
