//! Discrete BRT operators: ray-traced sparse, fast Fourier-domain, and the
//! analytic oracle used for testing.

pub mod analytic;
pub mod direct;
mod fft2;
pub mod fourier;

use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analytic::analytic_brt;
pub use direct::{DirectOperator, WeightPrecision};
pub use fft2::next_smooth;
pub use fourier::{filtered_response, FourierOperator, FourierOptions};

use crate::error::{BrtError, Result};
use crate::geometry::{check_grid, Image, ImageGrid, ImageKind, SourceDetectorPair};

/// Data indexed by scatter location `y` for one source-detector pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SinogramData {
    pub grid: ImageGrid,
    pub values: Vec<f64>,
}

impl SinogramData {
    pub fn new(grid: ImageGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BrtError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(SinogramData { grid, values })
    }

    pub fn zeros(grid: ImageGrid) -> Self {
        SinogramData {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which discretization to use for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Realization {
    Direct,
    Fourier,
    /// Fourier where supported, direct otherwise.
    #[default]
    Auto,
}

impl FromStr for Realization {
    type Err = BrtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Realization::Direct),
            "fourier" => Ok(Realization::Fourier),
            "auto" => Ok(Realization::Auto),
            other => Err(BrtError::InvalidParameter(format!(
                "unknown operator realization '{other}' (expected direct, fourier or auto)"
            ))),
        }
    }
}

impl std::fmt::Display for Realization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Realization::Direct => "direct",
            Realization::Fourier => "fourier",
            Realization::Auto => "auto",
        })
    }
}

/// One realization of the discrete weights `h_i(y|x)`.
#[derive(Debug, Clone)]
pub enum BrtOperator {
    Direct(DirectOperator),
    Fourier(FourierOperator),
}

impl BrtOperator {
    pub fn pair(&self) -> &SourceDetectorPair {
        match self {
            BrtOperator::Direct(op) => op.pair(),
            BrtOperator::Fourier(op) => op.pair(),
        }
    }

    pub fn grid(&self) -> &ImageGrid {
        match self {
            BrtOperator::Direct(op) => op.grid(),
            BrtOperator::Fourier(op) => op.grid(),
        }
    }

    pub fn realization(&self) -> Realization {
        match self {
            BrtOperator::Direct(_) => Realization::Direct,
            BrtOperator::Fourier(_) => Realization::Fourier,
        }
    }

    /// `(B mu)(y)` on raw slices; lengths must equal the grid size.
    pub fn forward_slice(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid().len()];
        match self {
            BrtOperator::Direct(op) => op.forward_into(mu, &mut out),
            BrtOperator::Fourier(op) => op.forward_into(mu, &mut out),
        }
        out
    }

    /// `(B^T p)(x)` on raw slices.
    pub fn adjoint_slice(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid().len()];
        match self {
            BrtOperator::Direct(op) => op.adjoint_into(p, &mut out),
            BrtOperator::Fourier(op) => op.adjoint_into(p, &mut out),
        }
        out
    }

    /// Row sums `sum_x h(y|x)`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.forward_slice(&vec![1.0; self.grid().len()])
    }
}

pub fn apply_forward(op: &BrtOperator, mu: &Image) -> Result<SinogramData> {
    check_grid(op.grid(), &mu.grid)?;
    Ok(SinogramData {
        grid: mu.grid,
        values: op.forward_slice(&mu.values),
    })
}

pub fn apply_adjoint(op: &BrtOperator, p: &SinogramData) -> Result<Image> {
    check_grid(op.grid(), &p.grid)?;
    Ok(Image {
        grid: p.grid,
        values: op.adjoint_slice(&p.values),
        kind: ImageKind::Attenuation,
    })
}

/// `Z0 = max_{i,y} sum_x h_i(y|x)`; must be strictly positive.
pub fn row_sum_max(ops: &[BrtOperator]) -> Result<f64> {
    let z0 = ops
        .iter()
        .flat_map(|op| op.row_sums())
        .fold(0.0_f64, f64::max);
    if z0 > 0.0 && z0.is_finite() {
        Ok(z0)
    } else {
        Err(BrtError::DegenerateOperator(z0))
    }
}

/// Build options shared by every operator in a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OperatorOptions {
    pub realization: Realization,
    pub precision: WeightPrecision,
    pub extra_rows: usize,
    pub smooth_sizes: bool,
}

/// Realization actually used for `pair` under the requested choice.
pub fn resolve_realization(pair: &SourceDetectorPair, requested: Realization) -> Result<Realization> {
    if pair.is_transmission {
        return Ok(Realization::Direct);
    }
    match requested {
        Realization::Direct => Ok(Realization::Direct),
        Realization::Fourier => {
            crate::geometry::spreading_factors(pair, &ImageGrid::new_unchecked(2, 2, 1.0, 1.0))?;
            let dot = pair.cos_angle();
            if dot > 0.0 {
                return Err(BrtError::BackScatter(dot));
            }
            Ok(Realization::Fourier)
        }
        Realization::Auto => {
            let supported = pair.theta_s.is_horizontal()
                && pair.cos_angle() < -crate::geometry::MIN_ABS_COS;
            Ok(if supported {
                Realization::Fourier
            } else {
                Realization::Direct
            })
        }
    }
}

/// The operators of every pair in a measurement, on one grid, with batched
/// application. Fourier members share padded dimensions so a single image
/// spectrum serves all of them.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    grid: ImageGrid,
    ops: Vec<BrtOperator>,
    fourier_idx: Vec<usize>,
    direct_idx: Vec<usize>,
}

impl OperatorSet {
    pub fn build(grid: &ImageGrid, pairs: &[SourceDetectorPair], opts: OperatorOptions) -> Result<Self> {
        let kinds = pairs
            .iter()
            .map(|p| resolve_realization(p, opts.realization))
            .collect::<Result<Vec<_>>>()?;
        let fopts = FourierOptions {
            extra_rows: opts.extra_rows,
            smooth_sizes: false,
            min_dims: None,
        };
        // Common padding: the largest requirement over the Fourier members.
        let mut common: Option<(usize, usize)> = None;
        for (p, k) in pairs.iter().zip(&kinds) {
            if *k == Realization::Fourier {
                let (n1, n2) = crate::geometry::padded_dims(p, grid)?;
                let n2 = n2 + opts.extra_rows;
                common = Some(match common {
                    None => (n1, n2),
                    Some((a, b)) => (a.max(n1), b.max(n2)),
                });
            }
        }
        let fopts = FourierOptions {
            smooth_sizes: opts.smooth_sizes,
            min_dims: common,
            ..fopts
        };
        let ops = pairs
            .iter()
            .zip(&kinds)
            .map(|(p, k)| match k {
                Realization::Fourier => {
                    FourierOperator::build_with(grid, p, fopts).map(BrtOperator::Fourier)
                }
                _ => Ok(BrtOperator::Direct(DirectOperator::build_with(grid, p, opts.precision))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_operators(*grid, ops))
    }

    /// Wraps prebuilt operators. Fourier members with differing padded
    /// dimensions are still handled, just without spectrum sharing.
    pub fn from_operators(grid: ImageGrid, ops: Vec<BrtOperator>) -> Self {
        let fourier_idx = ops
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, BrtOperator::Fourier(_)))
            .map(|(i, _)| i)
            .collect();
        let direct_idx = ops
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, BrtOperator::Direct(_)))
            .map(|(i, _)| i)
            .collect();
        OperatorSet {
            grid,
            ops,
            fourier_idx,
            direct_idx,
        }
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[BrtOperator] {
        &self.ops
    }

    pub fn get(&self, i: usize) -> &BrtOperator {
        &self.ops[i]
    }

    pub fn z0(&self) -> Result<f64> {
        row_sum_max(&self.ops)
    }

    fn fourier(&self, i: usize) -> &FourierOperator {
        match &self.ops[i] {
            BrtOperator::Fourier(f) => f,
            BrtOperator::Direct(_) => unreachable!("index list only holds Fourier members"),
        }
    }

    /// Groups Fourier members by padded dimensions.
    fn fourier_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &i in &self.fourier_idx {
            let dims = self.fourier(i).dims();
            match groups.iter_mut().find(|g| self.fourier(g[0]).dims() == dims) {
                Some(g) => g.push(i),
                None => groups.push(vec![i]),
            }
        }
        groups
    }

    /// `B_i mu` for every pair.
    pub fn forward_all(&self, mu: &[f64]) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); self.ops.len()];
        for &i in &self.direct_idx {
            out[i] = self.ops[i].forward_slice(mu);
        }
        for group in self.fourier_groups() {
            let fft = &self.fourier(group[0]).fft;
            let spec = fft.forward_real(mu);
            // Two real outputs per inverse transform: iDFT((H_a + j H_b) M).
            let results: Vec<(usize, Option<usize>, Vec<Complex64>)> = group
                .par_chunks(2)
                .map(|ch| {
                    let ha = &self.fourier(ch[0]).filter;
                    let prod: Vec<Complex64> = match ch.get(1) {
                        Some(&b) => {
                            let hb = &self.fourier(b).filter;
                            spec.iter()
                                .zip(ha.iter().zip(hb))
                                .map(|(m, (a, b))| m * (a + Complex64::i() * b))
                                .collect()
                        }
                        None => spec.iter().zip(ha).map(|(m, a)| m * a).collect(),
                    };
                    (ch[0], ch.get(1).copied(), fft.inverse_cropped(prod))
                })
                .collect();
            for (a, b, res) in results {
                out[a] = res.iter().map(|v| v.re).collect();
                if let Some(b) = b {
                    out[b] = res.iter().map(|v| v.im).collect();
                }
            }
        }
        debug_assert!(out.iter().all(|v| v.len() == n));
        out
    }

    /// `(sum_i B_i^T p_i, sum_i B_i^T q_i)`.
    pub fn adjoint_sum(&self, p: &[Vec<f64>], q: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let mut b1 = vec![0.0; n];
        let mut b2 = vec![0.0; n];
        for &i in &self.direct_idx {
            let (a1, a2) = rayon::join(
                || self.ops[i].adjoint_slice(&p[i]),
                || self.ops[i].adjoint_slice(&q[i]),
            );
            for x in 0..n {
                b1[x] += a1[x];
                b2[x] += a2[x];
            }
        }
        for group in self.fourier_groups() {
            let fft = &self.fourier(group[0]).fft;
            // conj(H_i) DFT(p_i + j q_i) accumulated over i, one inverse transform.
            let spectra: Vec<Vec<Complex64>> = group
                .par_iter()
                .map(|&i| {
                    let packed: Vec<Complex64> = p[i]
                        .iter()
                        .zip(&q[i])
                        .map(|(&a, &b)| Complex64::new(a, b))
                        .collect();
                    let mut s = fft.forward(&packed);
                    for (v, h) in s.iter_mut().zip(&self.fourier(i).filter) {
                        *v *= h.conj();
                    }
                    s
                })
                .collect();
            let mut acc = vec![Complex64::new(0.0, 0.0); fft.spectrum_len()];
            for s in spectra {
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v;
                }
            }
            let res = fft.inverse_cropped(acc);
            for x in 0..n {
                b1[x] += res[x].re;
                b2[x] += res[x].im;
            }
        }
        (b1, b2)
    }
}
