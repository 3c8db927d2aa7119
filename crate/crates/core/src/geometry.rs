//! Directions, source-detector pairs and the sampling lattice.
//!
//! Angles are measured counterclockwise from the +x (horizontal) axis and a
//! direction points from the scatter location toward the source or detector.
//! Pixel `(row, col)` has its center at
//! `((col + 0.5) * delta1 - L1 * delta1 / 2, (row + 0.5) * delta2 - L2 * delta2 / 2)`,
//! so rows grow along +y and the lattice is centered on the origin.

use serde::{Deserialize, Serialize};

use crate::error::{BrtError, Result};

/// Tolerance for unit-norm and antipodal checks.
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance for the horizontal-alignment check of the fast operator.
pub const ALIGN_TOL: f64 = 1e-9;
/// Smallest admissible `|theta_s . theta_d|` for the fast operator.
pub const MIN_ABS_COS: f64 = 1e-9;

// Components this close to zero come from sin/cos round-off at multiples of pi/2.
const SNAP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub ux: f64,
    pub uy: f64,
}

impl Direction {
    pub fn new(ux: f64, uy: f64) -> Result<Self> {
        let norm = ux.hypot(uy);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(BrtError::NotUnit(norm));
        }
        Ok(Direction { ux, uy })
    }

    /// Unit direction at `angle` radians, with round-off components snapped to zero.
    pub fn from_angle(angle: f64) -> Self {
        let (mut uy, mut ux) = angle.sin_cos();
        if ux.abs() < SNAP {
            ux = 0.0;
        }
        if uy.abs() < SNAP {
            uy = 0.0;
        }
        let norm = ux.hypot(uy);
        Direction {
            ux: ux / norm,
            uy: uy / norm,
        }
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.ux * other.ux + self.uy * other.uy
    }

    /// Magnitude of the 2D cross product.
    pub fn cross_norm(&self, other: &Direction) -> f64 {
        (self.ux * other.uy - self.uy * other.ux).abs()
    }

    pub fn angle(&self) -> f64 {
        self.uy.atan2(self.ux)
    }

    pub fn is_horizontal(&self) -> bool {
        self.uy.abs() <= ALIGN_TOL
    }
}

/// One broken-ray family: the direction toward the source and toward the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceDetectorPair {
    pub theta_s: Direction,
    pub theta_d: Direction,
    pub is_transmission: bool,
}

impl SourceDetectorPair {
    pub fn new(theta_s: Direction, theta_d: Direction) -> Self {
        let is_transmission = (theta_s.ux + theta_d.ux).abs() <= UNIT_TOL
            && (theta_s.uy + theta_d.uy).abs() <= UNIT_TOL;
        SourceDetectorPair {
            theta_s,
            theta_d,
            is_transmission,
        }
    }

    pub fn cos_angle(&self) -> f64 {
        self.theta_s.dot(&self.theta_d)
    }
}

/// Builds a pair from the source and detector angles (radians).
pub fn make_pair(source_angle: f64, detector_angle: f64) -> SourceDetectorPair {
    SourceDetectorPair::new(
        Direction::from_angle(source_angle),
        Direction::from_angle(detector_angle),
    )
}

/// Uniform orthogonal lattice with `l2` rows and `l1` columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub l1: usize,
    pub l2: usize,
    pub delta1: f64,
    pub delta2: f64,
}

impl ImageGrid {
    pub fn new(l1: usize, l2: usize, delta1: f64, delta2: f64) -> Result<Self> {
        if l1 < 2 || l2 < 2 {
            return Err(BrtError::InvalidGrid(format!(
                "need at least 2x2 samples, got L2={l2}, L1={l1}"
            )));
        }
        if !(delta1 > 0.0 && delta1.is_finite() && delta2 > 0.0 && delta2.is_finite()) {
            return Err(BrtError::InvalidGrid(format!(
                "spacings must be positive, got {delta2}, {delta1}"
            )));
        }
        Ok(ImageGrid {
            l1,
            l2,
            delta1,
            delta2,
        })
    }

    /// Same as [`ImageGrid::new`] but without the 2x2 minimum, for one-cell test geometries.
    pub fn new_unchecked(l1: usize, l2: usize, delta1: f64, delta2: f64) -> Self {
        ImageGrid {
            l1,
            l2,
            delta1,
            delta2,
        }
    }

    pub fn len(&self) -> usize {
        self.l1 * self.l2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.l1 + col
    }

    pub fn width(&self) -> f64 {
        self.l1 as f64 * self.delta1
    }

    pub fn height(&self) -> f64 {
        self.l2 as f64 * self.delta2
    }

    /// Physical center of pixel `(row, col)`.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.delta1 - 0.5 * self.width(),
            (row as f64 + 0.5) * self.delta2 - 0.5 * self.height(),
        )
    }

    /// Sample set `Y_i` of a pair. Scatter pairs use every pixel; a transmission
    /// pair keeps one pixel per line of response, the one on the detector-side
    /// boundary (its detector ray leaves the grid without entering another cell).
    pub fn active_mask(&self, pair: &SourceDetectorPair) -> Vec<bool> {
        if !pair.is_transmission {
            return vec![true; self.len()];
        }
        let u = pair.theta_d;
        let tx = if u.ux != 0.0 {
            0.5 * self.delta1 / u.ux.abs()
        } else {
            f64::INFINITY
        };
        let ty = if u.uy != 0.0 {
            0.5 * self.delta2 / u.uy.abs()
        } else {
            f64::INFINITY
        };
        let mut mask = vec![false; self.len()];
        for row in 0..self.l2 {
            for col in 0..self.l1 {
                let x_edge = (u.ux > 0.0 && col == self.l1 - 1) || (u.ux < 0.0 && col == 0);
                let y_edge = (u.uy > 0.0 && row == self.l2 - 1) || (u.uy < 0.0 && row == 0);
                let exits = if tx < ty {
                    x_edge
                } else if ty < tx {
                    y_edge
                } else {
                    x_edge || y_edge
                };
                mask[self.index(row, col)] = exits;
            }
        }
        mask
    }

    pub fn describe(&self) -> String {
        format!(
            "{}x{} (d2={}, d1={})",
            self.l2, self.l1, self.delta2, self.delta1
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageKind {
    Attenuation,
    Scatter,
    /// Unconstrained real samples (log data, projections).
    Data,
}

/// Samples on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub grid: ImageGrid,
    pub values: Vec<f64>,
    pub kind: ImageKind,
}

impl Image {
    /// Validating constructor: attenuation must be nonnegative, scatter in `[0, 1]`.
    pub fn new(grid: ImageGrid, values: Vec<f64>, kind: ImageKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BrtError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let img = Image { grid, values, kind };
        img.validate()?;
        Ok(img)
    }

    pub fn zeros(grid: ImageGrid, kind: ImageKind) -> Self {
        Image {
            grid,
            values: vec![0.0; grid.len()],
            kind,
        }
    }

    pub fn constant(grid: ImageGrid, value: f64, kind: ImageKind) -> Result<Self> {
        Image::new(grid, vec![value; grid.len()], kind)
    }

    pub fn validate(&self) -> Result<()> {
        for (index, &value) in self.values.iter().enumerate() {
            if !value.is_finite() {
                return Err(BrtError::InvalidParameter(format!(
                    "non-finite value at index {index}"
                )));
            }
            match self.kind {
                ImageKind::Attenuation if value < 0.0 => {
                    return Err(BrtError::NegativeImage { index, value })
                }
                ImageKind::Scatter if !(0.0..=1.0).contains(&value) => {
                    return Err(BrtError::ScatterOutOfRange { index, value })
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn check_grid(expected: &ImageGrid, got: &ImageGrid) -> Result<()> {
    if expected != got {
        return Err(BrtError::GridMismatch {
            expected: expected.describe(),
            got: got.describe(),
        });
    }
    Ok(())
}

/// Spreading lengths `(a_s, a_d)` of the fast operator's filters.
pub fn spreading_factors(pair: &SourceDetectorPair, grid: &ImageGrid) -> Result<(f64, f64)> {
    let s = pair.theta_s;
    if !s.is_horizontal() {
        return Err(BrtError::Alignment(s.ux, s.uy));
    }
    let cos = pair.cos_angle().abs();
    if cos <= MIN_ABS_COS {
        return Err(BrtError::DegenerateAngle(cos));
    }
    let a_s = grid.l1 as f64 * grid.delta1;
    Ok((a_s, a_s / cos))
}

/// Padded DFT dimensions `(N1, N2)` that hold the filtered data without aliasing.
pub fn padded_dims(pair: &SourceDetectorPair, grid: &ImageGrid) -> Result<(usize, usize)> {
    let (_, a_d) = spreading_factors(pair, grid)?;
    let rise = a_d * pair.theta_s.cross_norm(&pair.theta_d) / grid.delta2;
    // Round-off can leave an exact integer a few ulps high.
    let extra = (rise - 1e-9).ceil().max(0.0) as usize;
    Ok((3 * grid.l1, grid.l2 + extra))
}
