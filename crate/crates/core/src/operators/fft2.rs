//! Zero-padded 2D DFT restricted to an `l2 x l1` corner of an `n2 x n1` array.
//!
//! Spectra are stored transposed (`k1 * n2 + k2`) so the column pass works on
//! contiguous chunks and the filter multiply needs no extra transpose.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    pub l1: usize,
    pub l2: usize,
    pub n1: usize,
    pub n2: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{} in {}x{})", self.l2, self.l1, self.n2, self.n1)
    }
}

impl Fft2 {
    pub fn new(l1: usize, l2: usize, n1: usize, n2: usize) -> Self {
        assert!(n1 >= l1 && n2 >= l2);
        let mut planner = FftPlanner::new();
        Fft2 {
            l1,
            l2,
            n1,
            n2,
            row_fwd: planner.plan_fft_forward(n1),
            row_inv: planner.plan_fft_inverse(n1),
            col_fwd: planner.plan_fft_forward(n2),
            col_inv: planner.plan_fft_inverse(n2),
        }
    }

    pub fn spectrum_len(&self) -> usize {
        self.n1 * self.n2
    }

    /// Unnormalized DFT of the zero-padded `l2 x l1` input.
    pub fn forward(&self, input: &[Complex64]) -> Vec<Complex64> {
        let (l1, l2, n1, n2) = (self.l1, self.l2, self.n1, self.n2);
        debug_assert_eq!(input.len(), l1 * l2);
        let mut rows = vec![Complex64::new(0.0, 0.0); l2 * n1];
        for r in 0..l2 {
            rows[r * n1..r * n1 + l1].copy_from_slice(&input[r * l1..(r + 1) * l1]);
        }
        self.row_fwd.process(&mut rows);
        let mut spec = vec![Complex64::new(0.0, 0.0); n1 * n2];
        for r in 0..l2 {
            let src = &rows[r * n1..(r + 1) * n1];
            for (k1, v) in src.iter().enumerate() {
                spec[k1 * n2 + r] = *v;
            }
        }
        self.col_fwd.process(&mut spec);
        spec
    }

    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let c: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&c)
    }

    /// Inverse DFT scaled by `1 / (n1 n2)`, cropped to the leading `l2 x l1` block.
    /// Consumes the spectrum as scratch.
    pub fn inverse_cropped(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        let (l1, l2, n1, n2) = (self.l1, self.l2, self.n1, self.n2);
        self.col_inv.process(&mut spec);
        let mut rows = vec![Complex64::new(0.0, 0.0); l2 * n1];
        for k1 in 0..n1 {
            let src = &spec[k1 * n2..k1 * n2 + l2];
            for (r, v) in src.iter().enumerate() {
                rows[r * n1 + k1] = *v;
            }
        }
        drop(spec);
        self.row_inv.process(&mut rows);
        let scale = 1.0 / (n1 * n2) as f64;
        let mut out = Vec::with_capacity(l1 * l2);
        for r in 0..l2 {
            out.extend(rows[r * n1..r * n1 + l1].iter().map(|v| v * scale));
        }
        out
    }
}

/// Signed DFT frequency index of bin `k` in a length-`n` transform, in `[-n/2, n/2)`.
pub(crate) fn signed_index(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}
