//! Property tests of structural invariants.

use lqg_core::chaos::{ks_distance, poisson_cdf, wigner_surmise_cdf};
use lqg_core::domain::{build_grid, green_disc, green_square, green_square_exact};
use lqg_core::field::{weyl_constant, GmcMeasure};
use lqg_core::heat::{heat_trace, kpz_solve};
use lqg_core::spectral::{assemble_operator, eigenvalues_only};
use lqg_core::DomainSpec;
use proptest::prelude::*;

fn disc_point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| [r * a.cos(), r * a.sin()])
}

fn square_point() -> impl Strategy<Value = [f64; 2]> {
    (0.05..0.95f64, 0.05..0.95f64).prop_map(|(x, y)| [x, y])
}

proptest! {
    #[test]
    fn disc_green_symmetric_and_positive(x in disc_point(), y in disc_point()) {
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 1e-6);
        let (a, b) = (green_disc(x, y).unwrap(), green_disc(y, x).unwrap());
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn square_green_forms_agree(x in square_point(), y in square_point()) {
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 0.1);
        let exact = green_square_exact(x, y).unwrap();
        let series = green_square(x, y, 400).unwrap();
        prop_assert!(exact > 0.0);
        prop_assert!((exact - green_square_exact(y, x).unwrap()).abs() < 1e-12);
        // Truncation error of the sine series is O(1/(N d)), d the smaller of
        // the separation and the distances to the boundary.
        let wall = |p: [f64; 2]| p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]);
        let d = wall(x).min(wall(y)).min((x[0] - y[0]).hypot(x[1] - y[1]));
        let tol = 1.0 / (std::f64::consts::PI.powi(2) * 400.0 * d);
        prop_assert!((exact - series).abs() < tol, "{} vs {} (tol {})", exact, series, tol);
    }

    #[test]
    fn kpz_root_solves_relation(x in 0.0..=1.0f64, gamma in 0.0..1.99f64) {
        let d = kpz_solve(x, gamma).unwrap().delta;
        let q = gamma * gamma / 4.0;
        prop_assert!((q * d * d + (1.0 - q) * d - x).abs() < 1e-13);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= x - 1e-15);
    }

    #[test]
    fn kpz_monotone_in_x(a in 0.0..=1.0f64, b in 0.0..=1.0f64, gamma in 0.0..1.99f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(kpz_solve(lo, gamma).unwrap().delta <= kpz_solve(hi, gamma).unwrap().delta);
    }

    #[test]
    fn kpz_identity_at_small_gamma(x in 0.0..=1.0f64, gamma in 0.0..1e-4f64) {
        prop_assert!((kpz_solve(x, gamma).unwrap().delta - x).abs() < 1e-8);
    }

    #[test]
    fn reference_cdfs_are_monotone(s in 0.0..10.0f64, ds in 0.0..1.0f64) {
        let (a, b) = (wigner_surmise_cdf(s).unwrap(), wigner_surmise_cdf(s + ds).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && a <= b);
        prop_assert!(poisson_cdf(s) <= poisson_cdf(s + ds));
    }

    #[test]
    fn ks_distance_is_bounded(xs in prop::collection::vec(0.0..5.0f64, 1..200)) {
        let d = ks_distance(&xs, poisson_cdf);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-12);
    }

    #[test]
    fn weyl_constant_increases_with_gamma(a in 0.0..1.9f64, d in 1e-6..0.09f64) {
        prop_assert!(weyl_constant(a) < weyl_constant(a + d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_scales_inversely_with_mass(
        w in prop::collection::vec(0.01..2.0f64, 21),
        a in 0.1..10.0f64,
    ) {
        // Disc n = 6 has 21 interior points.
        let grid = build_grid(DomainSpec::disc(), 6).unwrap();
        prop_assume!(grid.len() == w.len());
        let m = GmcMeasure::from_weights(w, 1.0).unwrap();
        let base = eigenvalues_only(&assemble_operator(&grid, &m).unwrap()).unwrap();
        let scaled = eigenvalues_only(&assemble_operator(&grid, &m.scaled(a)).unwrap()).unwrap();
        prop_assert!(base.lambdas.iter().all(|&l| l > 0.0));
        for (l, ls) in base.lambdas.iter().zip(&scaled.lambdas) {
            prop_assert!((ls * a - l).abs() <= 1e-9 * l);
        }
        let times = [1e-3, 1e-2, 1e-1, 1.0];
        let h = heat_trace(&base, &times).unwrap().values;
        prop_assert!(h.windows(2).all(|p| p[1] < p[0]) && h[0] <= base.len() as f64);
    }
}
