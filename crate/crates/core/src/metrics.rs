//! Image quality metrics.

use crate::error::Result;
use crate::geometry::{check_grid, Image};

const WINDOW: usize = 8;
const SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; WINDOW * WINDOW] {
    let c = (WINDOW as f64 - 1.0) / 2.0;
    let mut w = [0.0; WINDOW * WINDOW];
    for r in 0..WINDOW {
        for k in 0..WINDOW {
            let (dr, dk) = (r as f64 - c, k as f64 - c);
            w[r * WINDOW + k] = (-(dr * dr + dk * dk) / (2.0 * SIGMA * SIGMA)).exp();
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean structural similarity over every fully contained 8x8 Gaussian-weighted
/// window (sigma 1.5), with stabilizers `(0.01 L)^2`, `(0.03 L)^2` and `L` the
/// largest value in either image (1 if that is not positive).
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_grid(&a.grid, &b.grid)?;
    let g = a.grid;
    let range = a.max().max(b.max());
    let l = if range > 0.0 { range } else { 1.0 };
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let w = gaussian_window();
    let rows = g.l2.saturating_sub(WINDOW - 1);
    let cols = g.l1.saturating_sub(WINDOW - 1);
    if rows == 0 || cols == 0 {
        return Err(crate::BrtError::InvalidGrid(format!(
            "SSIM needs at least {WINDOW}x{WINDOW} samples, got {}",
            g.describe()
        )));
    }
    let mut total = 0.0;
    for r0 in 0..rows {
        for c0 in 0..cols {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in 0..WINDOW {
                for k in 0..WINDOW {
                    let idx = (r0 + r) * g.l1 + c0 + k;
                    let wt = w[r * WINDOW + k];
                    let (x, y) = (a.values[idx], b.values[idx]);
                    ma += wt * x;
                    mb += wt * y;
                    saa += wt * x * x;
                    sbb += wt * y * y;
                    sab += wt * x * y;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / (rows * cols) as f64)
}
