//! Ray-traced sparse BRT operator.
//!
//! Row `y` holds the exact intersection lengths of the two half-lines
//! `{y + t theta_s}` and `{y + t theta_d}`, `t >= 0`, with the pixel cells,
//! clipped to the grid box. The vertex cell receives both half-segments.

use rayon::prelude::*;

use crate::geometry::{ImageGrid, SourceDetectorPair};

/// Storage precision of the sparse weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightPrecision {
    #[default]
    Double,
    /// Halves the footprint; used for the largest benchmark grids.
    Single,
}

#[derive(Debug, Clone)]
enum Weights {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

#[derive(Debug, Clone)]
pub struct DirectOperator {
    pair: SourceDetectorPair,
    grid: ImageGrid,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Weights,
    active: Vec<bool>,
}

/// Walks the half-line from `(px, py)` (box coordinates, origin at the lower-left
/// corner) along `(ux, uy)` and reports `(pixel, length)` for every cell crossed.
pub(crate) fn trace_half_line(
    grid: &ImageGrid,
    px: f64,
    py: f64,
    ux: f64,
    uy: f64,
    mut visit: impl FnMut(usize, f64),
) {
    let (l1, l2) = (grid.l1 as isize, grid.l2 as isize);
    let (d1, d2) = (grid.delta1, grid.delta2);
    let mut col = ((px / d1).floor() as isize).clamp(0, l1 - 1);
    let mut row = ((py / d2).floor() as isize).clamp(0, l2 - 1);
    let step_c: isize = if ux > 0.0 { 1 } else { -1 };
    let step_r: isize = if uy > 0.0 { 1 } else { -1 };

    // Boundary crossings are recomputed from the cell index so long rays do not drift.
    let next_x = |col: isize| -> f64 {
        if ux > 0.0 {
            ((col + 1) as f64 * d1 - px) / ux
        } else if ux < 0.0 {
            (col as f64 * d1 - px) / ux
        } else {
            f64::INFINITY
        }
    };
    let next_y = |row: isize| -> f64 {
        if uy > 0.0 {
            ((row + 1) as f64 * d2 - py) / uy
        } else if uy < 0.0 {
            (row as f64 * d2 - py) / uy
        } else {
            f64::INFINITY
        }
    };

    let mut t = 0.0;
    loop {
        let tx = next_x(col);
        let ty = next_y(row);
        let t_next = tx.min(ty);
        let len = t_next - t;
        if len > 0.0 {
            visit((row * l1 + col) as usize, len);
        }
        t = t_next;
        if tx <= ty {
            col += step_c;
        }
        if ty <= tx {
            row += step_r;
        }
        if col < 0 || col >= l1 || row < 0 || row >= l2 {
            break;
        }
    }
}

/// Traces both rays of sample `y` into `out`, merging repeated cells.
/// `slot` maps pixel -> position in `out` and must be `u32::MAX` on entry;
/// it is restored before returning.
fn trace_row(
    grid: &ImageGrid,
    pair: &SourceDetectorPair,
    y: usize,
    slot: &mut [u32],
    out: &mut Vec<(u32, f64)>,
) {
    out.clear();
    let (row, col) = (y / grid.l1, y % grid.l1);
    let px = (col as f64 + 0.5) * grid.delta1;
    let py = (row as f64 + 0.5) * grid.delta2;
    for dir in [pair.theta_s, pair.theta_d] {
        trace_half_line(grid, px, py, dir.ux, dir.uy, |pix, len| {
            let s = slot[pix];
            if s == u32::MAX {
                slot[pix] = out.len() as u32;
                out.push((pix as u32, len));
            } else {
                out[s as usize].1 += len;
            }
        });
    }
    for &(pix, _) in out.iter() {
        slot[pix as usize] = u32::MAX;
    }
}

const BLOCK_ROWS: usize = 2048;

impl DirectOperator {
    pub fn build(grid: &ImageGrid, pair: &SourceDetectorPair) -> Self {
        Self::build_with(grid, pair, WeightPrecision::Double)
    }

    pub fn build_with(
        grid: &ImageGrid,
        pair: &SourceDetectorPair,
        precision: WeightPrecision,
    ) -> Self {
        let n = grid.len();
        assert!(n < u32::MAX as usize, "grid too large for 32-bit column indices");
        let active = grid.active_mask(pair);
        let rows: Vec<usize> = (0..n).collect();

        // First pass counts entries so the big arrays are allocated exactly once.
        let counts: Vec<usize> = rows
            .par_chunks(BLOCK_ROWS)
            .flat_map_iter(|chunk| {
                let mut slot = vec![u32::MAX; n];
                let mut buf = Vec::new();
                chunk
                    .iter()
                    .map(|&y| {
                        if !active[y] {
                            return 0;
                        }
                        trace_row(grid, pair, y, &mut slot, &mut buf);
                        buf.len()
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0usize);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = *row_ptr.last().unwrap();
        drop(counts);

        let mut cols = Vec::with_capacity(nnz);
        let mut w64 = Vec::new();
        let mut w32 = Vec::new();
        match precision {
            WeightPrecision::Double => w64.reserve_exact(nnz),
            WeightPrecision::Single => w32.reserve_exact(nnz),
        }
        for chunk in rows.chunks(BLOCK_ROWS * rayon::current_num_threads().max(1)) {
            let block: Vec<Vec<(u32, f64)>> = chunk
                .par_chunks(BLOCK_ROWS)
                .flat_map_iter(|sub| {
                    let mut slot = vec![u32::MAX; n];
                    sub.iter()
                        .map(|&y| {
                            let mut buf = Vec::new();
                            if active[y] {
                                trace_row(grid, pair, y, &mut slot, &mut buf);
                            }
                            buf
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            for entries in block {
                for (c, w) in entries {
                    cols.push(c);
                    match precision {
                        WeightPrecision::Double => w64.push(w),
                        WeightPrecision::Single => w32.push(w as f32),
                    }
                }
            }
        }
        let weights = match precision {
            WeightPrecision::Double => Weights::F64(w64),
            WeightPrecision::Single => Weights::F32(w32),
        };
        DirectOperator {
            pair: *pair,
            grid: *grid,
            row_ptr,
            cols,
            weights,
            active,
        }
    }

    /// Cheap estimate of [`nnz`](Self::nnz) from the exit distance of every
    /// half-line, without tracing; used to budget memory before a build.
    pub fn estimate_nnz(grid: &ImageGrid, pair: &SourceDetectorPair) -> usize {
        let (w, h) = (grid.width(), grid.height());
        let active = grid.active_mask(pair);
        let mut total = 0.0;
        for (y, _) in active.iter().enumerate().filter(|(_, &a)| a) {
            let px = ((y % grid.l1) as f64 + 0.5) * grid.delta1;
            let py = ((y / grid.l1) as f64 + 0.5) * grid.delta2;
            for u in [pair.theta_s, pair.theta_d] {
                let tx = if u.ux > 0.0 { (w - px) / u.ux } else if u.ux < 0.0 { -px / u.ux } else { f64::INFINITY };
                let ty = if u.uy > 0.0 { (h - py) / u.uy } else if u.uy < 0.0 { -py / u.uy } else { f64::INFINITY };
                let t = tx.min(ty);
                total += t * (u.ux.abs() / grid.delta1 + u.uy.abs() / grid.delta2) + 0.5;
            }
        }
        total.round() as usize
    }

    /// Bytes per stored nonzero (weight plus column index).
    pub fn bytes_per_nonzero(precision: WeightPrecision) -> usize {
        match precision {
            WeightPrecision::Double => 12,
            WeightPrecision::Single => 8,
        }
    }

    pub fn pair(&self) -> &SourceDetectorPair {
        &self.pair
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn precision(&self) -> WeightPrecision {
        match self.weights {
            Weights::F64(_) => WeightPrecision::Double,
            Weights::F32(_) => WeightPrecision::Single,
        }
    }

    /// Nonzero weights `(pixel, h(y|x))` of row `y`.
    pub fn row(&self, y: usize) -> Vec<(usize, f64)> {
        let range = self.row_ptr[y]..self.row_ptr[y + 1];
        match &self.weights {
            Weights::F64(w) => range.map(|k| (self.cols[k] as usize, w[k])).collect(),
            Weights::F32(w) => range
                .map(|k| (self.cols[k] as usize, w[k] as f64))
                .collect(),
        }
    }

    pub(crate) fn forward_into(&self, mu: &[f64], out: &mut [f64]) {
        match &self.weights {
            Weights::F64(w) => spmv(&self.row_ptr, &self.cols, w, mu, out),
            Weights::F32(w) => spmv(&self.row_ptr, &self.cols, w, mu, out),
        }
    }

    pub(crate) fn adjoint_into(&self, p: &[f64], out: &mut [f64]) {
        match &self.weights {
            Weights::F64(w) => spmv_t(&self.row_ptr, &self.cols, w, p, out),
            Weights::F32(w) => spmv_t(&self.row_ptr, &self.cols, w, p, out),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.grid.len()];
        let mut out = vec![0.0; self.grid.len()];
        self.forward_into(&ones, &mut out);
        out
    }
}

fn spmv<W: Copy + Into<f64> + Sync>(
    row_ptr: &[usize],
    cols: &[u32],
    w: &[W],
    x: &[f64],
    out: &mut [f64],
) {
    out.par_iter_mut().enumerate().for_each(|(y, o)| {
        let mut acc = 0.0;
        for k in row_ptr[y]..row_ptr[y + 1] {
            acc += w[k].into() * x[cols[k] as usize];
        }
        *o = acc;
    });
}

fn spmv_t<W: Copy + Into<f64>>(row_ptr: &[usize], cols: &[u32], w: &[W], p: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (y, &py) in p.iter().enumerate() {
        if py == 0.0 {
            continue;
        }
        for k in row_ptr[y]..row_ptr[y + 1] {
            out[cols[k] as usize] += w[k].into() * py;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_pair;
    use std::f64::consts::PI;

    #[test]
    fn one_cell_grid_sums_both_half_chords() {
        let grid = ImageGrid::new_unchecked(1, 1, 2.0, 3.0);
        let op = DirectOperator::build(&grid, &make_pair(PI, PI / 2.0));
        // Left: 1.0 to the box edge; up: 1.5.
        assert_eq!(op.row(0), vec![(0, 2.5)]);
    }

    #[test]
    fn horizontal_transmission_row_spans_full_width() {
        let grid = ImageGrid::new(7, 3, 1.0, 1.0).unwrap();
        let op = DirectOperator::build(&grid, &make_pair(PI, 0.0));
        let sums = op.row_sums();
        for y in 0..grid.len() {
            let expected = if op.active()[y] { 7.0 } else { 0.0 };
            assert!((sums[y] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_ray_hits_expected_cells() {
        let grid = ImageGrid::new(3, 3, 1.0, 1.0).unwrap();
        let mut hits = Vec::new();
        trace_half_line(&grid, 0.5, 0.5, 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), |p, l| {
            hits.push((p, l))
        });
        let cells: Vec<usize> = hits.iter().map(|h| h.0).collect();
        assert_eq!(cells, vec![0, 4, 8]);
        let total: f64 = hits.iter().map(|h| h.1).sum();
        assert!((total - 2.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn nnz_estimate_is_close() {
        let grid = ImageGrid::new(40, 30, 0.05, 0.05).unwrap();
        for pair in [make_pair(PI, PI / 10.0), make_pair(2.0, -0.7), make_pair(PI, 0.0)] {
            let exact = DirectOperator::build(&grid, &pair).nnz() as f64;
            let est = DirectOperator::estimate_nnz(&grid, &pair) as f64;
            assert!((est - exact).abs() < 0.05 * exact, "{est} vs {exact}");
        }
    }

    #[test]
    fn single_precision_matches_double() {
        let grid = ImageGrid::new(9, 6, 0.5, 0.5).unwrap();
        let pair = make_pair(PI, 0.4);
        let a = DirectOperator::build(&grid, &pair);
        let b = DirectOperator::build_with(&grid, &pair, WeightPrecision::Single);
        assert_eq!(a.nnz(), b.nnz());
        let (sa, sb) = (a.row_sums(), b.row_sums());
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() < 1e-5 * x.abs().max(1.0));
        }
    }
}
