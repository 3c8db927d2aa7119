//! Alternating minimization: per-pixel scatter updates at fixed attenuation,
//! then per-pixel attenuation updates of the separable surrogate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{BrtError, Result};
use crate::forward_model::{means_from_projections, objective, MeasurementSet, ObjectiveValue};
use crate::geometry::{check_grid, Image, ImageKind};
use crate::operators::OperatorSet;
use crate::surrogates::{attenuation_coeffs, family_points, reg_coeffs, scatter_gain, Neighborhood};

/// Which images are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    #[default]
    Joint,
    /// Attenuation held fixed.
    ScatterOnly,
    /// Scatter held fixed.
    AttenuationOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda_alpha: f64,
    pub lambda_mu: f64,
    pub delta: f64,
    pub max_outer_iters: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Ceiling for attenuation values that no data constrain.
    pub mu_max: f64,
    /// Relative objective change over a full iteration below which we stop.
    pub stop_tol: f64,
    pub mode: EstimationMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_alpha: 0.0,
            lambda_mu: 0.0,
            delta: 0.01,
            max_outer_iters: 500,
            newton_tol: 1e-10,
            newton_max: 50,
            mu_max: 10.0,
            stop_tol: 1e-7,
            mode: EstimationMode::Joint,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(BrtError::InvalidParameter(format!("{what} = {v} is out of range")))
        };
        if !(self.lambda_alpha >= 0.0 && self.lambda_alpha.is_finite()) {
            return bad("lambda_alpha", self.lambda_alpha);
        }
        if !(self.lambda_mu >= 0.0 && self.lambda_mu.is_finite()) {
            return bad("lambda_mu", self.lambda_mu);
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta", self.delta);
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol", self.newton_tol);
        }
        if !(self.mu_max > 0.0 && self.mu_max.is_finite()) {
            return bad("mu_max", self.mu_max);
        }
        if !(self.stop_tol > 0.0) {
            return bad("stop_tol", self.stop_tol);
        }
        if self.newton_max == 0 {
            return bad("newton_max", 0.0);
        }
        Ok(())
    }
}

/// Half step after which a trace entry was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Init,
    Scatter,
    Attenuation,
}

impl Half {
    pub fn as_str(&self) -> &'static str {
        match self {
            Half::Init => "init",
            Half::Scatter => "scatter",
            Half::Attenuation => "attenuation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub half: Half,
    pub objective: ObjectiveValue,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub alpha: Image,
    pub mu: Image,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub converged: bool,
}

/// Root of a nondecreasing residual on `[lo, hi]` with `f(lo) < 0 < f(hi)`.
///
/// `f` returns `(value, derivative)`. Newton steps start at `x0` and fall back
/// to bisection whenever they leave the shrinking bracket; after `newton_max`
/// Newton steps only bisection is used. Succeeds once `|f| <= tol * scale` or
/// the bracket reaches machine width.
pub fn solve_pixel_1d(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    scale: f64,
    newton_max: usize,
) -> Result<f64> {
    if !(lo <= hi) {
        return Err(BrtError::RootSolveFailure(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    let mut newton_left = newton_max;
    for _ in 0..newton_max + 2200 {
        let (v, dv) = f(x);
        if v.is_nan() {
            return Err(BrtError::RootSolveFailure(format!("residual is NaN at {x}")));
        }
        if v.abs() <= tol * scale {
            return Ok(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let mut next = f64::NAN;
        if newton_left > 0 && dv > 0.0 && dv.is_finite() && v.is_finite() {
            newton_left -= 1;
            next = x - v / dv;
        }
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    Err(BrtError::RootSolveFailure(format!(
        "no convergence in bracket [{lo}, {hi}]"
    )))
}

/// Real roots of `c[0] + c[1] t + c[2] t^2 + c[3] t^3`.
fn poly_roots(c: [f64; 4]) -> Vec<f64> {
    let mag = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if mag == 0.0 {
        return Vec::new();
    }
    let tiny = 1e-14 * mag;
    if c[3].abs() <= tiny {
        if c[2].abs() <= tiny {
            return if c[1].abs() > tiny { vec![-c[0] / c[1]] } else { Vec::new() };
        }
        let (a, b, cc) = (c[2], c[1], c[0]);
        let disc = b * b - 4.0 * a * cc;
        if disc < 0.0 {
            return Vec::new();
        }
        let s = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
        let mut r = Vec::new();
        if q != 0.0 {
            r.push(q / a);
            r.push(cc / q);
        } else {
            r.push(0.0);
        }
        return r;
    }
    // Depressed cubic t = s - a/3.
    let (a, b, cc) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let sd = disc.sqrt();
        let u = (-q / 2.0 + sd).cbrt();
        let v = (-q / 2.0 - sd).cbrt();
        vec![u + v + shift]
    } else {
        let r = (-p / 3.0).max(0.0).sqrt();
        if r == 0.0 {
            return vec![shift];
        }
        let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift)
            .collect()
    }
}

/// Per-pixel scatter solve. `terms` holds `(gdot, d, beta)` of every scatter
/// pair at this pixel; `k` and `l` are the constant and slope of the
/// regularization part of the residual.
fn scatter_pixel(
    alpha_hat: f64,
    terms: &[(f64, f64, f64)],
    k_reg: f64,
    l: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if terms.is_empty() && l == 0.0 {
        // Nothing depends on this pixel.
        return Ok(alpha_hat);
    }
    let k = k_reg + terms.iter().map(|t| t.0).sum::<f64>();
    let rational: Vec<(f64, f64, f64)> = terms.iter().copied().filter(|t| t.1 > 0.0).collect();
    let f = |a: f64| {
        let mut v = k + l * a;
        let mut dv = l;
        for &(g, d, b) in &rational {
            let den = a * g + b;
            v -= d * g / den;
            dv += d * g * g / (den * den);
        }
        (v, dv)
    };
    let f0 = if rational.iter().any(|t| t.2 == 0.0) {
        f64::NEG_INFINITY
    } else {
        f(0.0).0
    };
    if f0 >= 0.0 {
        return Ok(0.0);
    }
    let (f1, _) = f(1.0);
    if f1 <= 0.0 {
        return Ok(1.0);
    }
    // Closed-form polynomial root for up to two rational terms.
    let poly = match rational.as_slice() {
        [] => None,
        [(g, d, b)] => Some([k * b - d * g, k * g + l * b, l * g, 0.0]),
        [(g1, d1, b1), (g2, d2, b2)] => {
            let (p2, p1, p0) = (g1 * g2, g1 * b2 + g2 * b1, b1 * b2);
            Some([
                k * p0 - d1 * g1 * b2 - d2 * g2 * b1,
                l * p0 + k * p1 - (d1 + d2) * g1 * g2,
                l * p1 + k * p2,
                l * p2,
            ])
        }
        _ => None,
    };
    let x0 = poly
        .and_then(|c| {
            poly_roots(c)
                .into_iter()
                .filter(|r| r.is_finite() && *r > 0.0 && *r < 1.0)
                .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
        })
        .unwrap_or(alpha_hat.clamp(0.0, 1.0));
    let scale = terms.iter().map(|t| t.0).sum::<f64>() + k_reg.abs() + l + f64::MIN_POSITIVE;
    solve_pixel_1d(f, 0.0, 1.0, x0, cfg.newton_tol, scale, cfg.newton_max)
}

/// Scatter half step from projections `B_i mu_hat`.
pub(crate) fn scatter_step(
    alpha_hat: &[f64],
    proj: &[Vec<f64>],
    ms: &MeasurementSet,
    cfg: &SolverConfig,
    nb: &Neighborhood,
) -> Result<Vec<f64>> {
    let gdot = scatter_gain(proj, ms);
    let lam = cfg.lambda_alpha;
    let reg = (lam > 0.0).then(|| reg_coeffs(alpha_hat, &ms.grid, nb));
    let scatter_pairs: Vec<usize> = (0..ms.n_pairs()).filter(|&i| !ms.pairs[i].is_transmission).collect();
    (0..ms.grid.len())
        .into_par_iter()
        .map(|y| {
            let terms: SmallVec<[(f64, f64, f64); 8]> = scatter_pairs
                .iter()
                .filter(|&&i| ms.active[i][y])
                .map(|&i| (gdot[i][y], ms.d[i][y], ms.source.beta[i][y]))
                .collect();
            let (k_reg, l) = match &reg {
                Some(c) => (lam * (c.c1[y] - 2.0 * c.c2[y] * alpha_hat[y]), 2.0 * lam * c.c2[y]),
                None => (0.0, 0.0),
            };
            scatter_pixel(alpha_hat[y], &terms, k_reg, l, cfg)
        })
        .collect()
}

fn attenuation_pixel(
    mu_hat: f64,
    b1: f64,
    b2: f64,
    z0: f64,
    reg: Option<(f64, f64)>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let (lc1, lc2) = reg.unwrap_or((0.0, 0.0));
    if b1 == 0.0 && b2 == 0.0 && reg.is_none() {
        return Ok(mu_hat);
    }
    let f = |m: f64| {
        let e = (-z0 * (m - mu_hat)).exp();
        (
            b1 - b2 * e + lc1 + 2.0 * lc2 * (m - mu_hat),
            z0 * b2 * e + 2.0 * lc2,
        )
    };
    if f(0.0).0 >= 0.0 {
        return Ok(0.0);
    }
    if reg.is_none() {
        if b1 == 0.0 {
            return Ok(cfg.mu_max);
        }
        return Ok((mu_hat + (b2 / b1).ln() / z0).clamp(0.0, cfg.mu_max));
    }
    // Grow the bracket geometrically until the residual changes sign.
    let mut hi = (2.0 * mu_hat).max(1.0 / z0).min(cfg.mu_max);
    while f(hi).0 <= 0.0 {
        if hi >= cfg.mu_max {
            return Ok(cfg.mu_max);
        }
        hi = (2.0 * hi).min(cfg.mu_max);
    }
    let scale = b1.abs() + lc1.abs() + 2.0 * lc2 * (mu_hat + 1.0) + f64::MIN_POSITIVE;
    solve_pixel_1d(f, 0.0, hi, mu_hat, cfg.newton_tol, scale, cfg.newton_max)
}

#[allow(clippy::too_many_arguments)]
/// Attenuation half step from projections `B_i mu_hat` and the current scatter.
pub(crate) fn attenuation_step(
    alpha: &[f64],
    mu_hat: &[f64],
    proj: &[Vec<f64>],
    ms: &MeasurementSet,
    ops: &OperatorSet,
    z0: f64,
    cfg: &SolverConfig,
    nb: &Neighborhood,
) -> Result<Vec<f64>> {
    let (q, p) = family_points(alpha, proj, ms)?;
    let coeffs = attenuation_coeffs(&p, &q, ops, z0)?;
    let lam = cfg.lambda_mu;
    let reg = (lam > 0.0).then(|| reg_coeffs(mu_hat, &ms.grid, nb));
    (0..ms.grid.len())
        .into_par_iter()
        .map(|x| {
            let r = reg.as_ref().map(|c| (lam * c.c1[x], lam * c.c2[x]));
            attenuation_pixel(mu_hat[x], coeffs.b1[x], coeffs.b2[x], z0, r, cfg)
        })
        .collect()
}

fn check_inputs(alpha: &Image, mu: &Image, ms: &MeasurementSet, ops: &OperatorSet, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
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
    Image { kind: ImageKind::Attenuation, ..mu.clone() }.validate()
}

/// One scatter update at fixed attenuation.
pub fn scatter_update(
    alpha_hat: &Image,
    mu_hat: &Image,
    ms: &MeasurementSet,
    ops: &OperatorSet,
    cfg: &SolverConfig,
) -> Result<Image> {
    check_inputs(alpha_hat, mu_hat, ms, ops, cfg)?;
    let nb = Neighborhood::new(cfg.delta)?;
    let proj = ops.forward_all(&mu_hat.values);
    let values = scatter_step(&alpha_hat.values, &proj, ms, cfg, &nb)?;
    Ok(Image {
        grid: ms.grid,
        values,
        kind: ImageKind::Scatter,
    })
}

/// One attenuation update at fixed (already updated) scatter.
pub fn attenuation_update(
    alpha_hat: &Image,
    mu_hat: &Image,
    ms: &MeasurementSet,
    ops: &OperatorSet,
    cfg: &SolverConfig,
) -> Result<Image> {
    check_inputs(alpha_hat, mu_hat, ms, ops, cfg)?;
    let nb = Neighborhood::new(cfg.delta)?;
    let z0 = ops.z0()?;
    let proj = ops.forward_all(&mu_hat.values);
    let values = attenuation_step(&alpha_hat.values, &mu_hat.values, &proj, ms, ops, z0, cfg, &nb)?;
    Ok(Image {
        grid: ms.grid,
        values,
        kind: ImageKind::Attenuation,
    })
}

/// Alternating minimization from `(alpha0, mu0)`. The objective is recorded
/// after every half step and must never increase beyond round-off.
pub fn joint_estimate(
    alpha0: &Image,
    mu0: &Image,
    ms: &MeasurementSet,
    ops: &OperatorSet,
    cfg: &SolverConfig,
    mut progress: impl FnMut(&TraceEntry),
) -> Result<ReconResult> {
    check_inputs(alpha0, mu0, ms, ops, cfg)?;
    let start = Instant::now();
    let nb = Neighborhood::new(cfg.delta)?;
    let z0 = ops.z0()?;
    let mut alpha = alpha0.values.clone();
    let mut mu = mu0.values.clone();
    let mut proj = ops.forward_all(&mu);
    let eval = |alpha: &[f64], mu: &[f64], proj: &[Vec<f64>]| -> Result<ObjectiveValue> {
        let g = means_from_projections(alpha, proj, ms);
        objective(&ms.d, &g, &ms.grid, alpha, mu, cfg.lambda_alpha, cfg.lambda_mu, &nb)
    };
    let mut j = eval(&alpha, &mu, &proj)?;
    let mut trace = vec![TraceEntry {
        iter: 0,
        half: Half::Init,
        objective: j,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }];
    progress(&trace[0]);

    // Absolute round-off of evaluating J as a sum of per-bin terms of size
    // ~(d + g); below this level changes in J are not resolvable.
    let total_counts: f64 = ms.d.iter().flatten().sum::<f64>()
        + means_from_projections(&alpha, &proj, ms).iter().flatten().sum::<f64>();
    let resolution = 16.0 * f64::EPSILON * total_counts;
    let check = |iteration: usize, half: &'static str, before: f64, after: f64| {
        if after > before + 1e-9 * before.abs() + resolution {
            Err(BrtError::MonotonicityViolation {
                iteration,
                half,
                before,
                after,
            })
        } else {
            Ok(())
        }
    };

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_outer_iters {
        let j_start = j.total;
        if cfg.mode != EstimationMode::AttenuationOnly {
            alpha = scatter_step(&alpha, &proj, ms, cfg, &nb)?;
            let jn = eval(&alpha, &mu, &proj)?;
            check(k, "scatter", j.total, jn.total)?;
            j = jn;
            trace.push(TraceEntry {
                iter: k,
                half: Half::Scatter,
                objective: j,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            progress(trace.last().unwrap());
        }
        if cfg.mode != EstimationMode::ScatterOnly {
            mu = attenuation_step(&alpha, &mu, &proj, ms, ops, z0, cfg, &nb)?;
            proj = ops.forward_all(&mu);
            let jn = eval(&alpha, &mu, &proj)?;
            check(k, "attenuation", j.total, jn.total)?;
            j = jn;
            trace.push(TraceEntry {
                iter: k,
                half: Half::Attenuation,
                objective: j,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            progress(trace.last().unwrap());
        }
        iterations = k;
        let change = j_start - j.total;
        if change <= cfg.stop_tol * j_start.abs() {
            converged = true;
            break;
        }
    }
    Ok(ReconResult {
        alpha: Image {
            grid: ms.grid,
            values: alpha,
            kind: ImageKind::Scatter,
        },
        mu: Image {
            grid: ms.grid,
            values: mu,
            kind: ImageKind::Attenuation,
        },
        trace,
        iterations,
        converged,
    })
}
