//! Closed-form BRT of analytic phantoms, used as the testing oracle.
//!
//! Each sample is the sum of the two half-line integrals from the pixel center
//! along `theta_s` and `theta_d`, restricted to the grid's bounding box.

use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::SinogramData;
use crate::error::{BrtError, Result};
use crate::geometry::{Direction, ImageGrid, SourceDetectorPair};
use crate::phantoms::{to_local, PhantomDescription, Shape};

/// Parameter `t >= 0` at which the ray from `p` along `u` leaves the box
/// `[-w/2, w/2] x [-h/2, h/2]`.
fn box_exit(grid: &ImageGrid, p: (f64, f64), u: Direction) -> f64 {
    let (hw, hh) = (grid.width() / 2.0, grid.height() / 2.0);
    let tx = if u.ux > 0.0 {
        (hw - p.0) / u.ux
    } else if u.ux < 0.0 {
        (-hw - p.0) / u.ux
    } else {
        f64::INFINITY
    };
    let ty = if u.uy > 0.0 {
        (hh - p.1) / u.uy
    } else if u.uy < 0.0 {
        (-hh - p.1) / u.uy
    } else {
        f64::INFINITY
    };
    tx.min(ty).max(0.0)
}

/// Length of `[t1, t2] ∩ [0, t_max]`.
fn overlap(t1: f64, t2: f64, t_max: f64) -> f64 {
    (t2.min(t_max) - t1.max(0.0)).max(0.0)
}

/// Integral of one shape along `p + t u`, `t in [0, t_max]`.
fn shape_integral(shape: &Shape, p: (f64, f64), u: Direction, t_max: f64) -> Result<f64> {
    match *shape {
        Shape::Ellipse {
            center,
            semi_axes: (a, b),
            rotation_deg,
            value,
        } => {
            let (qx, qy) = to_local(p.0, p.1, center, rotation_deg);
            let (vx, vy) = to_local(center.0 + u.ux, center.1 + u.uy, center, rotation_deg);
            let qa = (vx / a).powi(2) + (vy / b).powi(2);
            let qb = 2.0 * (qx * vx / (a * a) + qy * vy / (b * b));
            let qc = (qx / a).powi(2) + (qy / b).powi(2) - 1.0;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc <= 0.0 {
                return Ok(0.0);
            }
            let s = disc.sqrt();
            // Numerically stable pair of roots.
            let q = -0.5 * (qb + qb.signum() * s);
            let (r1, r2) = if q != 0.0 { (q / qa, qc / q) } else { (-s / (2.0 * qa), s / (2.0 * qa)) };
            Ok(value * overlap(r1.min(r2), r1.max(r2), t_max))
        }
        Shape::Rectangle {
            center,
            half_widths: (hx, hy),
            rotation_deg,
            value,
        } => {
            let (qx, qy) = to_local(p.0, p.1, center, rotation_deg);
            let (vx, vy) = to_local(center.0 + u.ux, center.1 + u.uy, center, rotation_deg);
            let mut t1 = f64::NEG_INFINITY;
            let mut t2 = f64::INFINITY;
            for (q, v, h) in [(qx, vx, hx), (qy, vy, hy)] {
                if v.abs() < 1e-15 {
                    if q.abs() > h {
                        return Ok(0.0);
                    }
                } else {
                    let (ta, tb) = ((-h - q) / v, (h - q) / v);
                    t1 = t1.max(ta.min(tb));
                    t2 = t2.min(ta.max(tb));
                }
            }
            Ok(value * overlap(t1, t2, t_max))
        }
        Shape::Gaussian {
            center,
            sigma,
            amplitude,
        } => {
            if (sigma.0 - sigma.1).abs() > 1e-12 * sigma.0.abs().max(sigma.1.abs()) {
                return Err(BrtError::UnsupportedShape(format!(
                    "anisotropic Gaussian (sigma = {:?}) has no closed-form half-line integral here",
                    sigma
                )));
            }
            let s = sigma.0;
            let (dx, dy) = (p.0 - center.0, p.1 - center.1);
            let b = dx * u.ux + dy * u.uy;
            let d2 = (dx * dx + dy * dy - b * b).max(0.0);
            let k = s * 2f64.sqrt();
            let upper = if t_max.is_finite() { erfc((t_max + b) / k) } else { 0.0 };
            Ok(amplitude * (-d2 / (2.0 * s * s)).exp() * s * (PI / 2.0).sqrt() * (erfc(b / k) - upper))
        }
    }
}

/// Half-line integral of the phantom from `p` along `u`, clipped to the grid box.
pub fn half_line_integral(
    shape: &PhantomDescription,
    grid: &ImageGrid,
    p: (f64, f64),
    u: Direction,
) -> Result<f64> {
    let t_max = box_exit(grid, p, u);
    let mut acc = 0.0;
    for s in &shape.shapes {
        acc += shape_integral(s, p, u, t_max)?;
    }
    Ok(shape.scale * acc)
}

/// Exact BRT of `shape` sampled at every pixel center of `grid`.
pub fn analytic_brt(
    shape: &PhantomDescription,
    pair: &SourceDetectorPair,
    grid: &ImageGrid,
) -> Result<SinogramData> {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|y| {
            let p = grid.center(y / grid.l1, y % grid.l1);
            Ok(half_line_integral(shape, grid, p, pair.theta_s)?
                + half_line_integral(shape, grid, p, pair.theta_d)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SinogramData { grid: *grid, values })
}
