//! Poisson measurement model for single-scatter and transmission data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{BrtError, Result};
use crate::geometry::{check_grid, Image, ImageGrid, ImageKind, SourceDetectorPair};
use crate::operators::{analytic_brt, OperatorSet};
use crate::phantoms::PhantomDescription;
use crate::surrogates::{regularizer, Neighborhood};

/// Source intensity per scatter location and background per (pair, location).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub i0: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

impl SourceModel {
    /// Constant `I0` and `beta` everywhere.
    pub fn uniform(grid: &ImageGrid, n_pairs: usize, i0: f64, beta: f64) -> Result<Self> {
        let s = SourceModel {
            i0: vec![i0; grid.len()],
            beta: vec![vec![beta; grid.len()]; n_pairs],
        };
        s.validate(grid.len(), n_pairs)?;
        Ok(s)
    }

    pub fn validate(&self, n: usize, n_pairs: usize) -> Result<()> {
        if self.i0.len() != n {
            return Err(BrtError::LengthMismatch {
                expected: n,
                got: self.i0.len(),
            });
        }
        if self.beta.len() != n_pairs {
            return Err(BrtError::LengthMismatch {
                expected: n_pairs,
                got: self.beta.len(),
            });
        }
        if let Some(v) = self.i0.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(BrtError::InvalidParameter(format!(
                "source intensity must be positive, got {v}"
            )));
        }
        for b in &self.beta {
            if b.len() != n {
                return Err(BrtError::LengthMismatch {
                    expected: n,
                    got: b.len(),
                });
            }
            if let Some(v) = b.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(BrtError::InvalidParameter(format!(
                    "background must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Counts `d_i(y)` for every pair, with the active sample sets `Y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub grid: ImageGrid,
    pub pairs: Vec<SourceDetectorPair>,
    pub active: Vec<Vec<bool>>,
    pub d: Vec<Vec<f64>>,
    pub source: SourceModel,
}

impl MeasurementSet {
    /// Validates shapes and forces `d = 0` off the active sets.
    pub fn new(
        grid: ImageGrid,
        pairs: Vec<SourceDetectorPair>,
        mut d: Vec<Vec<f64>>,
        source: SourceModel,
    ) -> Result<Self> {
        let n = grid.len();
        source.validate(n, pairs.len())?;
        if d.len() != pairs.len() {
            return Err(BrtError::LengthMismatch {
                expected: pairs.len(),
                got: d.len(),
            });
        }
        let active: Vec<Vec<bool>> = pairs.iter().map(|p| grid.active_mask(p)).collect();
        for (di, ai) in d.iter_mut().zip(&active) {
            if di.len() != n {
                return Err(BrtError::LengthMismatch {
                    expected: n,
                    got: di.len(),
                });
            }
            for (index, (v, &a)) in di.iter_mut().zip(ai).enumerate() {
                if !(*v >= 0.0 && v.is_finite()) {
                    return Err(BrtError::NegativeInput { index, value: *v });
                }
                if !a {
                    *v = 0.0;
                }
            }
        }
        Ok(MeasurementSet {
            grid,
            pairs,
            active,
            d,
            source,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }
}

/// Model means `g_i(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCounts {
    pub g: Vec<Vec<f64>>,
}

/// Means from precomputed projections `B_i mu`.
pub(crate) fn means_from_projections(alpha: &[f64], proj: &[Vec<f64>], ms: &MeasurementSet) -> Vec<Vec<f64>> {
    (0..ms.n_pairs())
        .map(|i| {
            let tx = ms.pairs[i].is_transmission;
            (0..ms.grid.len())
                .map(|y| {
                    if !ms.active[i][y] {
                        return 0.0;
                    }
                    let a = if tx { 1.0 } else { alpha[y] };
                    ms.source.beta[i][y] + ms.source.i0[y] * a * (-proj[i][y]).exp()
                })
                .collect()
        })
        .collect()
}

pub fn mean_counts(alpha: &Image, mu: &Image, ms: &MeasurementSet, ops: &OperatorSet) -> Result<MeanCounts> {
    check_grid(&ms.grid, &alpha.grid)?;
    check_grid(&ms.grid, &mu.grid)?;
    check_grid(&ms.grid, ops.grid())?;
    if ops.len() != ms.n_pairs() {
        return Err(BrtError::LengthMismatch {
            expected: ms.n_pairs(),
            got: ops.len(),
        });
    }
    Image { kind: ImageKind::Scatter, ..alpha.clone() }.validate()?;
    Image { kind: ImageKind::Attenuation, ..mu.clone() }.validate()?;
    let proj = ops.forward_all(&mu.values);
    Ok(MeanCounts {
        g: means_from_projections(&alpha.values, &proj, ms),
    })
}

/// Exact projections `B_i mu` of an analytic phantom for every pair, as used
/// to simulate data without discretization error in the exponent.
pub fn analytic_projections(
    phantom: &PhantomDescription,
    pairs: &[SourceDetectorPair],
    grid: &ImageGrid,
) -> Result<Vec<Vec<f64>>> {
    pairs
        .iter()
        .map(|p| analytic_brt(phantom, p, grid).map(|s| s.values))
        .collect()
}

/// Means from the analytic phantom's projections and a scatter image.
pub fn mean_counts_analytic(alpha: &Image, phantom: &PhantomDescription, ms: &MeasurementSet) -> Result<MeanCounts> {
    check_grid(&ms.grid, &alpha.grid)?;
    Image { kind: ImageKind::Scatter, ..alpha.clone() }.validate()?;
    let proj = analytic_projections(phantom, &ms.pairs, &ms.grid)?;
    Ok(MeanCounts {
        g: means_from_projections(&alpha.values, &proj, ms),
    })
}

fn bin_seed(seed: u64, i: usize, y: usize) -> u64 {
    // SplitMix64 finalizer over the combined key.
    let mut z = seed
        ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `d_i(y) ~ Poisson(g_i(y))`, one independent stream per bin, so the
/// result does not depend on evaluation order or thread count.
pub fn simulate(g: &MeanCounts, seed: u64) -> Vec<Vec<f64>> {
    g.g.iter()
        .enumerate()
        .map(|(i, gi)| {
            gi.par_iter()
                .enumerate()
                .map(|(y, &mean)| {
                    if mean <= 0.0 {
                        return 0.0;
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(bin_seed(seed, i, y));
                    Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(0.0)
                })
                .collect()
        })
        .collect()
}

#[inline]
pub(crate) fn i_div_term(d: f64, g: f64) -> Option<f64> {
    if d == 0.0 {
        Some(g)
    } else if g > 0.0 {
        // d ln(d/g) - d + g = d (u - ln(1 + u)) with u = (g - d)/d; this form
        // keeps full relative precision when g is close to d.
        let u = (g - d) / d;
        Some(d * (u - u.ln_1p()))
    } else {
        None
    }
}

/// Csiszár I-divergence `sum d ln(d/g) - d + g`, with `0 ln 0 = 0`.
pub fn i_divergence(d: &[Vec<f64>], g: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (pair, (di, gi)) in d.iter().zip(g).enumerate() {
        for (sample, (&dv, &gv)) in di.iter().zip(gi).enumerate() {
            total += i_div_term(dv, gv).ok_or(BrtError::ModelZeroWithData {
                pair,
                sample,
                data: dv,
            })?;
        }
    }
    Ok(total)
}

/// Poisson log-likelihood `sum d ln g - g`, without the data-only constant.
pub fn log_likelihood(d: &[Vec<f64>], g: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (pair, (di, gi)) in d.iter().zip(g).enumerate() {
        for (sample, (&dv, &gv)) in di.iter().zip(gi).enumerate() {
            if dv > 0.0 {
                if gv <= 0.0 {
                    return Err(BrtError::ModelZeroWithData {
                        pair,
                        sample,
                        data: dv,
                    });
                }
                total += dv * gv.ln();
            }
            total -= gv;
        }
    }
    Ok(total)
}

/// Objective value and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub i_div: f64,
    pub r_alpha: f64,
    pub r_mu: f64,
}

/// `J = I(d||g) + lambda_alpha R(alpha) + lambda_mu R(mu)`.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    d: &[Vec<f64>],
    g: &[Vec<f64>],
    grid: &ImageGrid,
    alpha: &[f64],
    mu: &[f64],
    lambda_alpha: f64,
    lambda_mu: f64,
    nb: &Neighborhood,
) -> Result<ObjectiveValue> {
    let i_div = i_divergence(d, g)?;
    let r_alpha = if lambda_alpha > 0.0 { regularizer(alpha, grid, nb) } else { 0.0 };
    let r_mu = if lambda_mu > 0.0 { regularizer(mu, grid, nb) } else { 0.0 };
    Ok(ObjectiveValue {
        total: i_div + lambda_alpha * r_alpha + lambda_mu * r_mu,
        i_div,
        r_alpha,
        r_mu,
    })
}
