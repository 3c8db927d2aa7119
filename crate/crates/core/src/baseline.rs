//! Log-domain baseline: thresholded data and the averaged scatter estimate
//! obtained by undoing a supplied attenuation estimate.

use crate::error::{BrtError, Result};
use crate::forward_model::MeasurementSet;
use crate::geometry::{check_grid, Image, ImageKind};
use crate::operators::OperatorSet;

/// Thresholded counts `max(d - beta, d0)` and log data `ln I0 - ln dbar`.
pub fn baseline_preprocess(d: &[f64], beta: &[f64], i0: &[f64], d0: f64) -> (Vec<f64>, Vec<f64>) {
    let dbar: Vec<f64> = d.iter().zip(beta).map(|(&d, &b)| (d - b).max(d0)).collect();
    let bhat = dbar.iter().zip(i0).map(|(&v, &i)| i.ln() - v.ln()).collect();
    (dbar, bhat)
}

/// `alpha(y) = mean_i dbar_i(y) / I0(y) * exp((B_i mu_hat)(y))`, clamped to
/// `[0, 1]`. Only scatter pairs enter the average.
pub fn baseline_scatter(
    dbar: &[Vec<f64>],
    mu_hat: &Image,
    ms: &MeasurementSet,
    ops: &OperatorSet,
) -> Result<Image> {
    check_grid(&ms.grid, &mu_hat.grid)?;
    let scatter: Vec<usize> = (0..ms.n_pairs()).filter(|&i| !ms.pairs[i].is_transmission).collect();
    if scatter.is_empty() {
        return Err(BrtError::InvalidParameter(
            "baseline needs at least one scatter pair".into(),
        ));
    }
    let proj = ops.forward_all(&mu_hat.values);
    let n = ms.grid.len();
    let values = (0..n)
        .map(|y| {
            let s: f64 = scatter
                .iter()
                .map(|&i| dbar[i][y] / ms.source.i0[y] * proj[i][y].exp())
                .sum();
            (s / scatter.len() as f64).clamp(0.0, 1.0)
        })
        .collect();
    Ok(Image {
        grid: ms.grid,
        values,
        kind: ImageKind::Scatter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_and_inversion() {
        let (dbar, bhat) = baseline_preprocess(&[0.0], &[0.0], &[350.0], 1.0);
        assert_eq!(dbar, vec![1.0]);
        assert!((bhat[0] - 350f64.ln()).abs() < 1e-15);
        let b = 0.7;
        let d = 350.0 * (-b as f64).exp() + 17.5;
        let (_, bhat) = baseline_preprocess(&[d], &[17.5], &[350.0], 1.0);
        assert!((bhat[0] - b).abs() < 1e-12);
    }
}
