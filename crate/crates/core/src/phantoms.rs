//! Analytic phantoms (ellipses, rectangles, isotropic Gaussians) and the
//! scatter maps derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{BrtError, Result};
use crate::geometry::{Image, ImageGrid, ImageKind};

/// One additive component of a phantom. Centers and sizes are in the grid's
/// physical coordinates (origin at the grid center); rotations in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Ellipse {
        center: (f64, f64),
        semi_axes: (f64, f64),
        rotation_deg: f64,
        value: f64,
    },
    Rectangle {
        center: (f64, f64),
        half_widths: (f64, f64),
        rotation_deg: f64,
        value: f64,
    },
    /// `amplitude * exp(-dx^2 / (2 sigma_x^2) - dy^2 / (2 sigma_y^2))`; the analytic
    /// oracle supports the isotropic case `sigma_x == sigma_y` only.
    Gaussian {
        center: (f64, f64),
        sigma: (f64, f64),
        amplitude: f64,
    },
}

impl Shape {
    /// Density at point `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Ellipse {
                center,
                semi_axes,
                rotation_deg,
                value,
            } => {
                let (u, v) = to_local(x, y, center, rotation_deg);
                let r = (u / semi_axes.0).powi(2) + (v / semi_axes.1).powi(2);
                if r <= 1.0 {
                    value
                } else {
                    0.0
                }
            }
            Shape::Rectangle {
                center,
                half_widths,
                rotation_deg,
                value,
            } => {
                let (u, v) = to_local(x, y, center, rotation_deg);
                if u.abs() <= half_widths.0 && v.abs() <= half_widths.1 {
                    value
                } else {
                    0.0
                }
            }
            Shape::Gaussian {
                center,
                sigma,
                amplitude,
            } => {
                let (dx, dy) = (x - center.0, y - center.1);
                amplitude * (-(dx * dx / (2.0 * sigma.0 * sigma.0) + dy * dy / (2.0 * sigma.1 * sigma.1))).exp()
            }
        }
    }
}

/// Rotates `(x, y)` into the frame of a shape centered at `c` and rotated by `deg`.
pub(crate) fn to_local(x: f64, y: f64, c: (f64, f64), deg: f64) -> (f64, f64) {
    let (s, co) = deg.to_radians().sin_cos();
    let (dx, dy) = (x - c.0, y - c.1);
    (co * dx + s * dy, -s * dx + co * dy)
}

/// A weighted union of shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomDescription {
    pub shapes: Vec<Shape>,
    pub scale: f64,
}

impl PhantomDescription {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.scale * self.shapes.iter().map(|s| s.eval(x, y)).sum::<f64>()
    }

    /// Samples at pixel centers, clipped to be nonnegative.
    pub fn render(&self, grid: &ImageGrid) -> Image {
        let mut values = Vec::with_capacity(grid.len());
        for r in 0..grid.l2 {
            for c in 0..grid.l1 {
                let (x, y) = grid.center(r, c);
                values.push(self.eval(x, y).max(0.0));
            }
        }
        Image {
            grid: *grid,
            values,
            kind: ImageKind::Attenuation,
        }
    }
}

/// Modified Shepp-Logan intensities `(A, a, b, x0, y0, phi_deg)` in the
/// standard upright orientation on `[-1, 1]^2`.
const MODIFIED_SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Modified Shepp-Logan phantom lying on its side (wider than tall) so its
/// support fits a 1.5 tall by 2 wide rectangle; peak value `max_mu`.
pub fn shepp_logan_description(max_mu: f64) -> PhantomDescription {
    let shapes = MODIFIED_SHEPP_LOGAN
        .iter()
        .map(|&(a, sa, sb, x0, y0, phi)| Shape::Ellipse {
            center: (-y0, x0),
            semi_axes: (sa, sb),
            rotation_deg: phi + 90.0,
            value: a,
        })
        .collect();
    PhantomDescription {
        shapes,
        scale: max_mu,
    }
}

pub fn shepp_logan(grid: &ImageGrid, max_mu: f64) -> Image {
    let mut img = shepp_logan_description(max_mu).render(grid);
    for v in &mut img.values {
        *v = v.min(max_mu);
    }
    img
}

/// Centered axis-aligned rectangle of size `width x height`.
pub fn rectangle_description(
    grid: &ImageGrid,
    width: f64,
    height: f64,
    value: f64,
    scale: f64,
) -> Result<PhantomDescription> {
    if !(width > 0.0 && height > 0.0) {
        return Err(BrtError::InvalidParameter(format!(
            "rectangle size must be positive, got {width} x {height}"
        )));
    }
    if width > grid.width() + 1e-12 || height > grid.height() + 1e-12 {
        return Err(BrtError::OutOfBounds(format!(
            "{width} x {height} rectangle does not fit the {} x {} grid extent",
            grid.width(),
            grid.height()
        )));
    }
    Ok(PhantomDescription {
        shapes: vec![Shape::Rectangle {
            center: (0.0, 0.0),
            half_widths: (width / 2.0, height / 2.0),
            rotation_deg: 0.0,
            value,
        }],
        scale,
    })
}

pub fn rectangle_phantom(
    grid: &ImageGrid,
    width: f64,
    height: f64,
    value: f64,
    scale: f64,
) -> Result<Image> {
    Ok(rectangle_description(grid, width, height, value, scale)?.render(grid))
}

/// How scatter density follows the (unscaled) attenuation image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScatterVariant {
    /// `sqrt(0.1 + 0.2 mu)`: scatter everywhere.
    #[default]
    Positive,
    /// `sqrt(0.15 mu)`: zero scatter wherever attenuation is zero.
    Nonneg,
}

pub fn scatter_map(mu_unscaled: &Image, variant: ScatterVariant) -> Result<Image> {
    let values = mu_unscaled
        .values
        .iter()
        .enumerate()
        .map(|(index, &m)| {
            if m < 0.0 || !m.is_finite() {
                return Err(BrtError::NegativeInput { index, value: m });
            }
            let a = match variant {
                ScatterVariant::Positive => (0.1 + 0.2 * m).sqrt(),
                ScatterVariant::Nonneg => (0.15 * m).sqrt(),
            };
            Ok(a.min(1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Image {
        grid: mu_unscaled.grid,
        values,
        kind: ImageKind::Scatter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_grid() -> ImageGrid {
        ImageGrid::new(200, 150, 0.01, 0.01).unwrap()
    }

    #[test]
    fn shepp_logan_range_and_support() {
        let grid = desk_grid();
        let img = shepp_logan(&grid, 1.0);
        assert!(img.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((img.max() - 1.0).abs() < 1e-12);
        for (r, c) in [(0, 0), (0, 199), (149, 0), (149, 199)] {
            assert_eq!(img.get(r, c), 0.0);
        }
        // Lying on its side: wider than tall.
        let row_mid: Vec<f64> = (0..200).map(|c| img.get(75, c)).collect();
        let col_mid: Vec<f64> = (0..150).map(|r| img.get(r, 100)).collect();
        let extent = |v: &[f64]| v.iter().filter(|&&x| x > 0.0).count();
        assert!(extent(&row_mid) > extent(&col_mid));
        let scaled = shepp_logan(&grid, 10.0);
        assert!((scaled.max() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_center_and_exterior() {
        let grid = desk_grid();
        let img = rectangle_phantom(&grid, 1.0, 1.5, 1.0, 3.0).unwrap();
        assert_eq!(img.get(75, 100), 3.0);
        assert_eq!(img.get(75, 10), 0.0);
        assert!(matches!(
            rectangle_phantom(&grid, 2.5, 1.0, 1.0, 1.0),
            Err(BrtError::OutOfBounds(_))
        ));
    }

    #[test]
    fn scatter_maps_follow_formulas() {
        let grid = ImageGrid::new(2, 2, 1.0, 1.0).unwrap();
        let mu = Image {
            grid,
            values: vec![0.0, 1.0, 0.5, 0.0],
            kind: ImageKind::Attenuation,
        };
        let pos = scatter_map(&mu, ScatterVariant::Positive).unwrap();
        let nn = scatter_map(&mu, ScatterVariant::Nonneg).unwrap();
        assert!((pos.values[0] - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((pos.values[1] - 0.3f64.sqrt()).abs() < 1e-15);
        assert_eq!(nn.values[0], 0.0);
        assert!((nn.values[1] - 0.15f64.sqrt()).abs() < 1e-15);
        assert_eq!(nn.values[3], 0.0);
        let bad = Image {
            values: vec![0.0, -1.0, 0.0, 0.0],
            ..mu
        };
        assert!(matches!(
            scatter_map(&bad, ScatterVariant::Positive),
            Err(BrtError::NegativeInput { index: 1, .. })
        ));
    }
}
