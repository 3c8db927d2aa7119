//! Fast BRT operator: filtered frequency response applied on a zero-padded DFT grid.
//!
//! The image is zero-padded to `N2 x N1`, transformed, multiplied by the filtered
//! BRT frequency response sampled at the DFT frequencies, inverse transformed and
//! cropped back to `L2 x L1`. The adjoint multiplies by the conjugated samples.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::fft2::{next_smooth, signed_index, Fft2};
use crate::error::{BrtError, Result};
use crate::geometry::{padded_dims, spreading_factors, ImageGrid, SourceDetectorPair};

/// Build-time knobs of the fast operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FourierOptions {
    /// Safety rows added to the vertical padding.
    pub extra_rows: usize,
    /// Round both padded sizes up to 5-smooth lengths (faster FFTs, same result
    /// up to the extra zero padding).
    pub smooth_sizes: bool,
    /// Lower bounds on `(N1, N2)`, used to share one padded grid between pairs.
    pub min_dims: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct FourierOperator {
    pair: SourceDetectorPair,
    grid: ImageGrid,
    a_s: f64,
    a_d: f64,
    pub(crate) fft: Arc<Fft2>,
    /// Filter samples in the transposed spectrum layout `k1 * n2 + k2`.
    pub(crate) filter: Vec<Complex64>,
}

#[inline]
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        let x = PI * u;
        1.0 - x * x / 6.0
    } else {
        (PI * u).sin() / (PI * u)
    }
}

/// `sin(x) / x` given a precomputed `sin(x)`; the series takes over near zero,
/// where the quotient of two small numbers would lose digits.
#[inline]
fn sin_over(x: f64, sin_x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        sin_x / x
    }
}

/// Filtered BRT frequency response at spatial frequency `w` (cycles per length).
pub fn filtered_response(w: (f64, f64), pair: &SourceDetectorPair, a_s: f64, a_d: f64) -> Complex64 {
    let ws = w.0 * pair.theta_s.ux + w.1 * pair.theta_s.uy;
    let wd = w.0 * pair.theta_d.ux + w.1 * pair.theta_d.uy;
    let e = |phase: f64| Complex64::from_polar(1.0, phase);
    let t1 = 2.0 * a_s * sinc(2.0 * a_s * ws) * e(2.0 * PI * a_s * ws);
    let t2 = a_s * sinc(a_s * ws) * e(5.0 * PI * a_s * ws + 2.0 * PI * a_d * wd);
    // 2 a_d / j = -2 a_d j
    let t3 = Complex64::new(0.0, -2.0 * a_d)
        * ((2.0 * PI * a_s * ws).sin() * sinc(a_d * wd))
        * e(2.0 * PI * a_s * ws + PI * a_d * wd);
    t1 + t2 + t3
}

impl FourierOperator {
    pub fn build(grid: &ImageGrid, pair: &SourceDetectorPair) -> Result<Self> {
        Self::build_with(grid, pair, FourierOptions::default())
    }

    pub fn build_with(
        grid: &ImageGrid,
        pair: &SourceDetectorPair,
        opts: FourierOptions,
    ) -> Result<Self> {
        if pair.is_transmission {
            return Err(BrtError::TransmissionPair);
        }
        let (a_s, a_d) = spreading_factors(pair, grid)?;
        let dot = pair.cos_angle();
        // With a 3 L1 horizontal period the back-scatter kernel wraps onto the crop.
        if dot > 0.0 {
            return Err(BrtError::BackScatter(dot));
        }
        let (mut n1, mut n2) = padded_dims(pair, grid)?;
        n2 += opts.extra_rows;
        if let Some((m1, m2)) = opts.min_dims {
            n1 = n1.max(m1);
            n2 = n2.max(m2);
        }
        if opts.smooth_sizes {
            n1 = next_smooth(n1);
            n2 = next_smooth(n2);
        }
        let fft = Arc::new(Fft2::new(grid.l1, grid.l2, n1, n2));
        let filter = Self::sample_filter(pair, grid, a_s, a_d, n1, n2);
        Ok(FourierOperator {
            pair: *pair,
            grid: *grid,
            a_s,
            a_d,
            fft,
            filter,
        })
    }

    /// Samples the response and symmetrizes it so the spatial kernel is real:
    /// `H[k] <- (H[k] + conj(H[-k])) / 2`. This only changes Nyquist bins and
    /// makes `Re(iDFT(H X))` equal to `iDFT(H X)` for real `x`.
    ///
    /// Both projections `w . theta_s` and `w . theta_d` are linear in `(w1, w2)`,
    /// so every phase factor splits into a per-column times a per-row table and
    /// no transcendental is evaluated per bin.
    fn sample_filter(
        pair: &SourceDetectorPair,
        grid: &ImageGrid,
        a_s: f64,
        a_d: f64,
        n1: usize,
        n2: usize,
    ) -> Vec<Complex64> {
        let p1 = n1 as f64 * grid.delta1;
        let p2 = n2 as f64 * grid.delta2;
        let (s, d) = (pair.theta_s, pair.theta_d);
        // Half phases A = pi a_s (w . theta_s) and D = pi a_d (w . theta_d).
        let axis = |n: usize, p: f64, cs: f64, cd: f64| -> Vec<(f64, f64, Complex64, Complex64)> {
            (0..n)
                .map(|k| {
                    let w = signed_index(k, n) / p;
                    let (a, dd) = (PI * a_s * w * cs, PI * a_d * w * cd);
                    (a, dd, Complex64::from_polar(1.0, a), Complex64::from_polar(1.0, dd))
                })
                .collect()
        };
        let t1 = axis(n1, p1, s.ux, d.ux);
        let t2 = axis(n2, p2, s.uy, d.uy);
        let raw: Vec<Complex64> = (0..n1 * n2)
            .map(|idx| {
                let (c, r) = (&t1[idx / n2], &t2[idx % n2]);
                let (a, dd) = (c.0 + r.0, c.1 + r.1);
                let ea = c.2 * r.2;
                let ed = c.3 * r.3;
                let e2a = ea * ea;
                let term1 = e2a * (2.0 * a_s * sin_over(2.0 * a, e2a.im));
                let term2 = e2a * e2a * ea * ed * ed * (a_s * sin_over(a, ea.im));
                let term3 = e2a * ed * Complex64::new(0.0, -2.0 * a_d * e2a.im * sin_over(dd, ed.im));
                term1 + term2 + term3
            })
            .collect();
        (0..n1 * n2)
            .map(|idx| {
                let (k1, k2) = (idx / n2, idx % n2);
                let mirror = ((n1 - k1) % n1) * n2 + (n2 - k2) % n2;
                (raw[idx] + raw[mirror].conj()) * 0.5
            })
            .collect()
    }

    pub fn pair(&self) -> &SourceDetectorPair {
        &self.pair
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn spreading(&self) -> (f64, f64) {
        (self.a_s, self.a_d)
    }

    /// Padded DFT dimensions `(N1, N2)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.fft.n1, self.fft.n2)
    }

    /// Stored (symmetrized) filter sample at DFT bin `(k1, k2)`.
    pub fn filter_sample(&self, k1: usize, k2: usize) -> Complex64 {
        self.filter[k1 * self.fft.n2 + k2]
    }

    pub(crate) fn forward_into(&self, mu: &[f64], out: &mut [f64]) {
        let mut spec = self.fft.forward_real(mu);
        for (s, h) in spec.iter_mut().zip(&self.filter) {
            *s *= h;
        }
        let res = self.fft.inverse_cropped(spec);
        for (o, v) in out.iter_mut().zip(res) {
            *o = v.re;
        }
    }

    pub(crate) fn adjoint_into(&self, p: &[f64], out: &mut [f64]) {
        let mut spec = self.fft.forward_real(p);
        for (s, h) in spec.iter_mut().zip(&self.filter) {
            *s *= h.conj();
        }
        let res = self.fft.inverse_cropped(spec);
        for (o, v) in out.iter_mut().zip(res) {
            *o = v.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_pair;

    #[test]
    fn dc_value_is_three_a_s() {
        let pair = make_pair(PI, PI / 10.0);
        let h = filtered_response((0.0, 0.0), &pair, 400.0, 420.0);
        assert!((h.re - 1200.0).abs() < 1e-9 && h.im.abs() < 1e-9);
        // Approaching zero along an axis stays continuous.
        let h = filtered_response((1e-12, 0.0), &pair, 400.0, 420.0);
        assert!((h - Complex64::new(1200.0, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn first_term_vanishes_at_sinc_zeros() {
        let pair = make_pair(PI, PI / 10.0);
        let (a_s, a_d) = (2.0, 2.0 / (PI / 10.0).cos());
        for m in [1.0, -2.0, 3.0] {
            // w along x: w . theta_s = -w1.
            let w = (-m / (2.0 * a_s), 0.0);
            let ws = -w.0;
            let t1 = 2.0 * a_s * sinc(2.0 * a_s * ws);
            assert!(t1.abs() < 1e-12);
            assert!(filtered_response(w, &pair, a_s, a_d).is_finite());
        }
    }

    #[test]
    fn finite_on_singular_lines_of_the_unfiltered_response() {
        let pair = make_pair(PI, PI / 10.0);
        let d = pair.theta_d;
        // w orthogonal to theta_d and to theta_s.
        for w in [(-d.uy * 3.0, d.ux * 3.0), (0.0, 5.0)] {
            assert!(filtered_response(w, &pair, 1.0, 1.05).is_finite());
        }
    }

    #[test]
    fn rejects_unsupported_pairs() {
        let grid = ImageGrid::new(8, 8, 1.0, 1.0).unwrap();
        assert_eq!(
            FourierOperator::build(&grid, &make_pair(PI, 0.0)).unwrap_err(),
            BrtError::TransmissionPair
        );
        assert!(matches!(
            FourierOperator::build(&grid, &make_pair(PI / 2.0, 0.3)),
            Err(BrtError::Alignment(..))
        ));
        assert!(matches!(
            FourierOperator::build(&grid, &make_pair(PI, PI / 2.0)),
            Err(BrtError::DegenerateAngle(..))
        ));
        assert!(matches!(
            FourierOperator::build(&grid, &make_pair(PI, PI - 0.3)),
            Err(BrtError::BackScatter(..))
        ));
    }

    #[test]
    fn tabulated_samples_match_the_direct_formula() {
        let grid = ImageGrid::new(24, 18, 0.05, 0.04).unwrap();
        for pair in [make_pair(PI, PI / 10.0), make_pair(PI, -0.7), make_pair(0.0, PI - 0.4)] {
            let op = FourierOperator::build(&grid, &pair).unwrap();
            let (n1, n2) = op.dims();
            let (a_s, a_d) = op.spreading();
            let (p1, p2) = (n1 as f64 * grid.delta1, n2 as f64 * grid.delta2);
            let h = |k1: usize, k2: usize| {
                let w = (signed_index(k1, n1) / p1, signed_index(k2, n2) / p2);
                filtered_response(w, &pair, a_s, a_d)
            };
            for k1 in 0..n1 {
                for k2 in 0..n2 {
                    let mirror = h((n1 - k1) % n1, (n2 - k2) % n2).conj();
                    let expect = (h(k1, k2) + mirror) * 0.5;
                    let got = op.filter_sample(k1, k2);
                    assert!((got - expect).norm() < 1e-12 * 3.0 * a_s, "bin ({k1}, {k2})");
                }
            }
        }
    }

    #[test]
    fn symmetrized_filter_is_hermitian() {
        let grid = ImageGrid::new(6, 5, 1.0, 1.0).unwrap();
        let op = FourierOperator::build(&grid, &make_pair(PI, 0.5)).unwrap();
        let (n1, n2) = op.dims();
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let a = op.filter_sample(k1, k2);
                let b = op.filter_sample((n1 - k1) % n1, (n2 - k2) % n2).conj();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
