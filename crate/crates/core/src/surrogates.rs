//! Quantities feeding the two pixel updates: scatter-fidelity derivatives, the
//! separable attenuation-fidelity surrogate, and the separable quadratic
//! surrogate of the edge-preserving regularizer.

use rayon::prelude::*;

use crate::error::{BrtError, Result};
use crate::forward_model::MeasurementSet;
use crate::geometry::ImageGrid;
use crate::operators::OperatorSet;

/// `I0(y) exp(-(B_i mu)(y))` for every pair, from projections `B_i mu`.
pub fn scatter_gain(proj: &[Vec<f64>], ms: &MeasurementSet) -> Vec<Vec<f64>> {
    proj.iter()
        .map(|pi| pi.iter().zip(&ms.source.i0).map(|(&b, &i0)| i0 * (-b).exp()).collect())
        .collect()
}

/// Gradient and curvature of the I-divergence in `alpha(y)` at fixed `mu`,
/// summed over scatter pairs. Transmission pairs do not depend on `alpha`.
pub fn scatter_derivatives(
    alpha: &[f64],
    gdot: &[Vec<f64>],
    ms: &MeasurementSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ms.grid.len();
    let mut grad = vec![0.0; n];
    let mut curv = vec![0.0; n];
    for (i, pair) in ms.pairs.iter().enumerate() {
        if pair.is_transmission {
            continue;
        }
        for y in 0..n {
            if !ms.active[i][y] {
                continue;
            }
            let (gd, d, b) = (gdot[i][y], ms.d[i][y], ms.source.beta[i][y]);
            grad[y] += gd;
            if d > 0.0 {
                let den = alpha[y] * gd + b;
                if den <= 0.0 {
                    return Err(BrtError::ZeroDenominator(y));
                }
                grad[y] -= d * gd / den;
                curv[y] += d * gd * gd / (den * den);
            }
        }
    }
    Ok((grad, curv))
}

/// Two-component split of each mean: background `[0]` and signal `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPoint {
    pub c0: Vec<Vec<f64>>,
    pub c1: Vec<Vec<f64>>,
}

/// Exponential-family point `q_hat` (at `mu_hat`) and the matching
/// linear-family point `p_hat` whose components sum to the data.
pub fn family_points(
    alpha: &[f64],
    proj: &[Vec<f64>],
    ms: &MeasurementSet,
) -> Result<(FamilyPoint, FamilyPoint)> {
    let n = ms.grid.len();
    let mut q = FamilyPoint {
        c0: vec![vec![0.0; n]; ms.n_pairs()],
        c1: vec![vec![0.0; n]; ms.n_pairs()],
    };
    let mut p = q.clone();
    for i in 0..ms.n_pairs() {
        let tx = ms.pairs[i].is_transmission;
        for y in 0..n {
            if !ms.active[i][y] {
                continue;
            }
            let a = if tx { 1.0 } else { alpha[y] };
            let q0 = ms.source.beta[i][y];
            let q1 = ms.source.i0[y] * a * (-proj[i][y]).exp();
            let g = q0 + q1;
            let d = ms.d[i][y];
            q.c0[i][y] = q0;
            q.c1[i][y] = q1;
            if d > 0.0 {
                if g <= 0.0 {
                    return Err(BrtError::ModelZeroWithData {
                        pair: i,
                        sample: y,
                        data: d,
                    });
                }
                // Single-component cases are assigned exactly so the split
                // never leaves round-off mass on a zero component.
                let p1 = if q0 == 0.0 {
                    d
                } else if q1 == 0.0 {
                    0.0
                } else {
                    q1 * (d / g)
                };
                p.c1[i][y] = p1;
                p.c0[i][y] = (d - p1).max(0.0);
            }
        }
    }
    Ok((q, p))
}

/// Coefficients of the separable attenuation surrogate
/// `b0 + sum_x [mu b1 + b2/Z0 (exp(-Z0 (mu - mu_hat)) - 1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationSurrogateCoeffs {
    /// Constant term; only filled when surrogate values are requested.
    pub b0: Option<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub z0: f64,
}

fn xlogx_over(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * (a / b).ln()
    }
}

/// `b1 = sum_i B_i^T p_hat_i(., 1)`, `b2 = sum_i B_i^T q_hat_i(., 1)`.
pub fn attenuation_coeffs(p: &FamilyPoint, q: &FamilyPoint, ops: &OperatorSet, z0: f64) -> Result<AttenuationSurrogateCoeffs> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(BrtError::DegenerateOperator(z0));
    }
    let (b1, b2) = ops.adjoint_sum(&p.c1, &q.c1);
    Ok(AttenuationSurrogateCoeffs {
        b0: None,
        b1,
        b2,
        z0,
    })
}

/// Constant term `b0` of the surrogate at `mu_hat`, built from its defining
/// sum over the linear-family point rather than from the divergence itself.
pub fn attenuation_b0(p: &FamilyPoint, q: &FamilyPoint, alpha: &[f64], ms: &MeasurementSet) -> f64 {
    let mut total = 0.0;
    for i in 0..ms.n_pairs() {
        let tx = ms.pairs[i].is_transmission;
        for y in 0..ms.grid.len() {
            if !ms.active[i][y] {
                continue;
            }
            let (p0, p1) = (p.c0[i][y], p.c1[i][y]);
            let beta = ms.source.beta[i][y];
            let a = if tx { 1.0 } else { alpha[y] };
            let signal_scale = ms.source.i0[y] * a;
            total += xlogx_over(p0, beta) - p0 + beta;
            total += xlogx_over(p1, signal_scale) - p1;
            total += q.c1[i][y];
        }
    }
    total
}

/// Surrogate value and gradient at `mu`. Requires `coeffs.b0`.
pub fn dbar(mu: &[f64], mu_hat: &[f64], coeffs: &AttenuationSurrogateCoeffs) -> Result<(f64, Vec<f64>)> {
    let b0 = coeffs.b0.ok_or_else(|| {
        BrtError::InvalidParameter("surrogate constant b0 was not computed".into())
    })?;
    let z0 = coeffs.z0;
    let mut value = b0;
    let mut grad = vec![0.0; mu.len()];
    for x in 0..mu.len() {
        let e = (-z0 * (mu[x] - mu_hat[x])).exp();
        value += mu[x] * coeffs.b1[x] + coeffs.b2[x] / z0 * (e - 1.0);
        grad[x] = coeffs.b1[x] - coeffs.b2[x] * e;
    }
    Ok((value, grad))
}

/// Hyperbola potential `delta^2 (sqrt(1 + (t/delta)^2) - 1)` and its derivative.
pub fn potential(t: f64, delta: f64) -> (f64, f64) {
    let s = (1.0 + (t / delta).powi(2)).sqrt();
    (delta * delta * (s - 1.0), t / s)
}

/// `phi'(t) / t`, equal to its limit 1 at `t = 0`.
pub fn potential_ratio(t: f64, delta: f64) -> f64 {
    1.0 / (1.0 + (t / delta).powi(2)).sqrt()
}

/// 8-connected neighborhood with weight 1 on axis neighbors and `1/sqrt(2)` on
/// diagonals; symmetric, so every unordered pair appears twice in the sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighborhood {
    pub delta: f64,
}

const OFFSETS: [(isize, isize, f64); 8] = [
    (-1, -1, std::f64::consts::FRAC_1_SQRT_2),
    (-1, 0, 1.0),
    (-1, 1, std::f64::consts::FRAC_1_SQRT_2),
    (0, -1, 1.0),
    (0, 1, 1.0),
    (1, -1, std::f64::consts::FRAC_1_SQRT_2),
    (1, 0, 1.0),
    (1, 1, std::f64::consts::FRAC_1_SQRT_2),
];

impl Neighborhood {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(BrtError::InvalidParameter(format!(
                "potential parameter must be positive, got {delta}"
            )));
        }
        Ok(Neighborhood { delta })
    }

    /// Calls `f(z, w)` for each neighbor `z` of pixel `x`.
    #[inline]
    pub fn for_each(&self, grid: &ImageGrid, x: usize, mut f: impl FnMut(usize, f64)) {
        let (r, c) = ((x / grid.l1) as isize, (x % grid.l1) as isize);
        for (dr, dc, w) in OFFSETS {
            let (rr, cc) = (r + dr, c + dc);
            if rr >= 0 && cc >= 0 && (rr as usize) < grid.l2 && (cc as usize) < grid.l1 {
                f(rr as usize * grid.l1 + cc as usize, w);
            }
        }
    }
}

/// `R = sum_x sum_{z in N_x} w(x,z) phi(img(x) - img(z))`.
pub fn regularizer(img: &[f64], grid: &ImageGrid, nb: &Neighborhood) -> f64 {
    let per_pixel: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let mut acc = 0.0;
            nb.for_each(grid, x, |z, w| acc += w * potential(img[x] - img[z], nb.delta).0);
            acc
        })
        .collect();
    per_pixel.iter().sum()
}

/// Separable quadratic surrogate `c0 + sum_x c1 (u - u_hat) + c2 (u - u_hat)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegSurrogateCoeffs {
    pub c0: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

/// Coefficients at the expansion point `img_hat`. The neighborhood is
/// symmetric, so the forward and reverse neighbor sums coincide and are
/// folded into a factor of two.
pub fn reg_coeffs(img_hat: &[f64], grid: &ImageGrid, nb: &Neighborhood) -> RegSurrogateCoeffs {
    let (c1, c2): (Vec<f64>, Vec<f64>) = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let (mut s1, mut s2) = (0.0, 0.0);
            nb.for_each(grid, x, |z, w| {
                let t = img_hat[x] - img_hat[z];
                s1 += w * potential(t, nb.delta).1;
                s2 += w * potential_ratio(t, nb.delta);
            });
            (2.0 * s1, 2.0 * s2)
        })
        .unzip();
    RegSurrogateCoeffs {
        c0: regularizer(img_hat, grid, nb),
        c1,
        c2,
    }
}

/// Surrogate value and gradient at `img`.
pub fn rbar(img: &[f64], img_hat: &[f64], coeffs: &RegSurrogateCoeffs) -> (f64, Vec<f64>) {
    let mut value = coeffs.c0;
    let mut grad = vec![0.0; img.len()];
    for x in 0..img.len() {
        let dx = img[x] - img_hat[x];
        value += coeffs.c1[x] * dx + coeffs.c2[x] * dx * dx;
        grad[x] = coeffs.c1[x] + 2.0 * coeffs.c2[x] * dx;
    }
    (value, grad)
}
