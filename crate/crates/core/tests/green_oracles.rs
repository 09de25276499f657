//! Green kernel normalisation against independent oracles: exit times and a
//! direct Brownian Monte Carlo of occupation times.

use std::f64::consts::PI;

use lqg_core::domain::{build_grid, green_disc};
use lqg_core::{DomainSpec, Point};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Σ_j g(x_i, x_j)·cell_area, which approximates E_x[τ] for generator ½Δ.
fn discrete_exit_times(spec: DomainSpec, n: usize) -> (Vec<Point>, Vec<f64>) {
    let grid = build_grid(spec, n).unwrap();
    let p = grid.len();
    let u = (0..p).map(|i| (0..p).map(|j| grid.green_entry(i, j)).sum::<f64>() * grid.cell_area).collect();
    (grid.points, u)
}

/// E_x[τ] on the unit square: Σ over odd m, n of 32 sin(mπx) sin(nπy) / (π⁴ mn(m²+n²)).
fn square_exit_time(x: Point) -> f64 {
    let mut s = 0.0;
    for m in (1..400).step_by(2) {
        for n in (1..400).step_by(2) {
            let (m, n) = (m as f64, n as f64);
            s += (m * PI * x[0]).sin() * (n * PI * x[1]).sin() / (m * n * (m * m + n * n));
        }
    }
    32.0 * s / PI.powi(4)
}

#[test]
fn disc_green_integrates_to_exit_time() {
    let worst = |n| {
        let (pts, u) = discrete_exit_times(DomainSpec::disc(), n);
        pts.iter()
            .zip(&u)
            .filter(|(x, _)| x[0].hypot(x[1]) < 0.7)
            .map(|(x, u)| (u - (1.0 - x[0] * x[0] - x[1] * x[1]) / 2.0).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(16), worst(40));
    assert!(fine < 0.02, "n = 40 error {fine}");
    assert!(fine < coarse, "no refinement gain: {coarse} -> {fine}");
}

#[test]
fn square_green_integrates_to_exit_time() {
    let (pts, u) = discrete_exit_times(DomainSpec::square(64), 32);
    let worst = pts
        .iter()
        .zip(&u)
        .filter(|(x, _)| x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]) > 0.2)
        .map(|(x, u)| (u - square_exit_time(*x)).abs() / square_exit_time(*x))
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "relative error {worst}");
}

#[test]
fn brownian_occupation_matches_green_quadrature() {
    // Expected time Brownian motion from x0 spends in the box B before leaving
    // the disc is ∫_B g(x0, y) dy.
    let x0 = [0.3, 0.0];
    let (lo, hi) = ([-0.2, -0.2], [0.2, 0.2]);
    let in_box = |x: Point| x[0] > lo[0] && x[0] < hi[0] && x[1] > lo[1] && x[1] < hi[1];

    let k = 200;
    let h = (hi[0] - lo[0]) / k as f64;
    let mut quad = 0.0;
    for a in 0..k {
        for b in 0..k {
            let y = [lo[0] + (a as f64 + 0.5) * h, lo[1] + (b as f64 + 0.5) * h];
            quad += green_disc(x0, y).unwrap() * h * h;
        }
    }

    let dt: f64 = 2e-5;
    let sd = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let paths = 2000;
    let mut occ = Vec::with_capacity(paths);
    for _ in 0..paths {
        let mut x = x0;
        let mut t_in = 0.0;
        while x[0].hypot(x[1]) < 1.0 {
            if in_box(x) {
                t_in += dt;
            }
            let (z0, z1): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            x = [x[0] + sd * z0, x[1] + sd * z1];
        }
        occ.push(t_in);
    }
    let mean = occ.iter().sum::<f64>() / paths as f64;
    let var = occ.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
    let se = (var / paths as f64).sqrt();
    assert!((mean - quad).abs() < 4.0 * se, "mc {mean} +- {se} vs quadrature {quad}");
}
