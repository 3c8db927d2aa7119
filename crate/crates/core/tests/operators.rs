use std::f64::consts::PI;

use brt_core::operators::analytic::half_line_integral;
use brt_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn build(grid: &ImageGrid, pair: &SourceDetectorPair, real: Realization) -> BrtOperator {
    let set = OperatorSet::build(
        grid,
        &[*pair],
        OperatorOptions {
            realization: real,
            ..Default::default()
        },
    )
    .unwrap();
    set.get(0).clone()
}

#[test]
fn adjoint_identity_holds_for_both_realizations() {
    let grid = ImageGrid::new(32, 24, 0.05, 0.04).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (make_pair(PI, PI / 10.0), Realization::Direct),
        (make_pair(PI, PI / 10.0), Realization::Fourier),
        (make_pair(0.0, PI - 0.5), Realization::Fourier),
        (make_pair(2.0, -0.9), Realization::Direct),
        (make_pair(PI / 2.0, -PI / 2.0), Realization::Direct),
    ];
    for (pair, real) in cases {
        let op = build(&grid, &pair, real);
        for _ in 0..10 {
            let mu: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>()).collect();
            let p: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let bmu = op.forward_slice(&mu);
            let btp = op.adjoint_slice(&p);
            let gap = (dot(&bmu, &p) - dot(&mu, &btp)).abs();
            assert!(gap <= 1e-10 * norm(&bmu) * norm(&p), "{real} {pair:?}: gap {gap}");
        }
    }
}

fn gaussian(center: (f64, f64), sigma: f64) -> PhantomDescription {
    PhantomDescription {
        shapes: vec![Shape::Gaussian {
            center,
            sigma: (sigma, sigma),
            amplitude: 1.0,
        }],
        scale: 1.0,
    }
}

fn interior_rel_rmse(est: &[f64], exact: &[f64], grid: &ImageGrid, margin: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for r in margin..grid.l2 - margin {
        for c in margin..grid.l1 - margin {
            let k = grid.index(r, c);
            num += (est[k] - exact[k]).powi(2);
            den += exact[k].powi(2);
        }
    }
    (num / den).sqrt()
}

#[test]
fn smooth_phantom_matches_analytic_transform() {
    let grid = ImageGrid::new(48, 40, 1.0 / 48.0, 1.0 / 48.0).unwrap();
    let ph = gaussian((0.02, -0.03), 0.1);
    let mu = ph.render(&grid);
    for (pair, real) in [
        (make_pair(PI, PI / 10.0), Realization::Direct),
        (make_pair(PI, PI / 10.0), Realization::Fourier),
        (make_pair(PI, -PI / 6.0), Realization::Fourier),
        (make_pair(2.5, 0.2), Realization::Direct),
    ] {
        let exact = analytic_brt(&ph, &pair, &grid).unwrap();
        let op = build(&grid, &pair, real);
        let est = apply_forward(&op, &mu).unwrap();
        let err = interior_rel_rmse(&est.values, &exact.values, &grid, 6);
        assert!(err < 0.02, "{real} {pair:?}: {err}");
    }
}

#[test]
fn direct_rows_reproduce_rectangle_chords() {
    let grid = ImageGrid::new(20, 16, 0.1, 0.1).unwrap();
    // Cell-aligned rectangle: columns 4..14, rows 3..11.
    let mu = rectangle_phantom(&grid, 1.0, 0.8, 1.0, 1.0).unwrap();
    let desc = brt_core::phantoms::rectangle_description(&grid, 1.0, 0.8, 1.0, 1.0).unwrap();
    for pair in [make_pair(PI, 0.0), make_pair(PI / 2.0, -PI / 2.0), make_pair(PI, PI / 2.0)] {
        let op = build(&grid, &pair, Realization::Direct);
        let est = apply_forward(&op, &mu).unwrap();
        let exact = analytic_brt(&desc, &pair, &grid).unwrap();
        for y in 0..grid.len() {
            if grid.active_mask(&pair)[y] {
                assert!((est.values[y] - exact.values[y]).abs() < 1e-12, "{pair:?} y={y}");
            }
        }
    }
}

#[test]
fn unit_shepp_logan_transform_bulk_sits_near_one_half() {
    let grid = ImageGrid::new(200, 150, 0.01, 0.01).unwrap();
    let desc = shepp_logan_description(1.0);
    for pair in [make_pair(PI, PI / 10.0), make_pair(PI, -PI / 10.0)] {
        let b = analytic_brt(&desc, &pair, &grid).unwrap();
        let mut sorted = b.values.clone();
        sorted.sort_by(f64::total_cmp);
        let p99 = sorted[sorted.len() * 99 / 100];
        assert!((p99 - 0.5).abs() <= 0.1, "99th percentile {p99}");
        // The few larger values come from rays grazing along the bright rim.
        let (k, _) = b
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let (x, y) = grid.center(k / grid.l1, k % grid.l1);
        assert_eq!(desc.eval(x, y), 1.0);
    }
}

#[test]
fn half_line_integrals_are_additive_along_the_ray() {
    let grid = ImageGrid::new(40, 40, 0.05, 0.05).unwrap();
    let desc = shepp_logan_description(1.0);
    let u = Direction::from_angle(0.3);
    let p = (-0.4, -0.2);
    let t = 0.37;
    let q = (p.0 + t * u.ux, p.1 + t * u.uy);
    let whole = half_line_integral(&desc, &grid, p, u).unwrap();
    let tail = half_line_integral(&desc, &grid, q, u).unwrap();
    // Segment [p, q] by midpoint quadrature.
    let n = 20_000;
    let seg: f64 = (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) * t / n as f64;
            desc.eval(p.0 + s * u.ux, p.1 + s * u.uy)
        })
        .sum::<f64>()
        * t
        / n as f64;
    assert!((whole - tail - seg).abs() < 2e-3 * whole.max(1e-3));
}

#[test]
fn batched_set_projections_match_single_operators() {
    let grid = ImageGrid::new(30, 20, 0.05, 0.05).unwrap();
    let pairs = [
        make_pair(PI, PI / 10.0),
        make_pair(PI, -PI / 10.0),
        make_pair(PI, 0.0),
        make_pair(PI - 0.4, 0.4 - PI / 2.0),
        make_pair(0.0, PI - 0.3),
    ];
    let set = OperatorSet::build(&grid, &pairs, OperatorOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mu: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>()).collect();
    let all = set.forward_all(&mu);
    for (i, pi) in all.iter().enumerate() {
        let single = set.get(i).forward_slice(&mu);
        for (a, b) in pi.iter().zip(&single) {
            assert!((a - b).abs() < 1e-10);
        }
    }
    let p: Vec<Vec<f64>> = (0..pairs.len())
        .map(|_| (0..grid.len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    let q: Vec<Vec<f64>> = (0..pairs.len())
        .map(|_| (0..grid.len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    let (b1, b2) = set.adjoint_sum(&p, &q);
    let mut e1 = vec![0.0; grid.len()];
    let mut e2 = vec![0.0; grid.len()];
    for i in 0..pairs.len() {
        for (acc, v) in e1.iter_mut().zip(set.get(i).adjoint_slice(&p[i])) {
            *acc += v;
        }
        for (acc, v) in e2.iter_mut().zip(set.get(i).adjoint_slice(&q[i])) {
            *acc += v;
        }
    }
    for x in 0..grid.len() {
        assert!((b1[x] - e1[x]).abs() < 1e-9 && (b2[x] - e2[x]).abs() < 1e-9);
    }
}
