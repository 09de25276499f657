//! Liouville Brownian motion as Brownian motion run on the quantum clock.
//!
//! The clock rate is `ε^{γ²/2} e^{γ h}` with `h` read from the grid cell
//! containing the walker (zero outside kept cells), so that the clock and
//! the lattice chaos measure are the same regularised object.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::bessel::{bessel_jn, bessel_zero_table};
use crate::diagnostics::Diagnostic;
use crate::domain::{DomainGrid, DomainKind, DomainSpec, Point};
use crate::error::{LqgError, Result};
use crate::spectral::LiouvilleSpectrum;

/// Walks longer than this many steps are treated as a numerical failure.
pub const MAX_STEPS: usize = 50_000_000;
/// Below this duration the disc heat kernel uses the image approximation.
pub const DISC_SERIES_SWITCH: f64 = 0.05;

/// Read-only clock rate on a grid.
#[derive(Debug, Clone)]
pub struct ClockField {
    pub grid: Arc<DomainGrid>,
    pub rates: Vec<f64>,
    pub outside_rate: f64,
    pub gamma: f64,
}

impl ClockField {
    pub fn new(grid: Arc<DomainGrid>, values: &[f64], gamma: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LqgError::config(format!(
                "field has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        let pre = grid.mesh.powf(gamma * gamma / 2.0);
        let rates = values.iter().map(|h| pre * (gamma * h).exp()).collect();
        Ok(ClockField { grid, rates, outside_rate: pre, gamma })
    }

    /// Rate and kept-cell index at `x`.
    pub fn rate_at(&self, x: Point) -> (f64, Option<usize>) {
        match self.grid.cell_of(x) {
            Some(i) => (self.rates[i], Some(i)),
            None => (self.outside_rate, None),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClockPath {
    pub start: Point,
    pub dt: f64,
    pub steps: Vec<[f64; 2]>,
    pub clock_increments: Vec<f64>,
    pub exit_step: usize,
    pub f_total: f64,
}

fn check_dt(grid: &DomainGrid, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= grid.mesh * grid.mesh / 4.0 * (1.0 + 1e-12)) {
        return Err(LqgError::config(format!(
            "time step {dt} must lie in (0, mesh²/4 = {}]",
            grid.mesh * grid.mesh / 4.0
        )));
    }
    Ok(())
}

fn gaussian_step(rng: &mut ChaCha8Rng, sd: f64) -> [f64; 2] {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    [sd * a, sd * b]
}

// Killed between two inside positions with the half-plane bridge crossing
// probability exp(-2 d₀ d₁ / dt).
fn crossed(rng: &mut ChaCha8Rng, spec: &DomainSpec, a: Point, b: Point, dt: f64) -> bool {
    let d1 = spec.distance_to_boundary(b);
    if d1 <= 0.0 {
        return true;
    }
    let d0 = spec.distance_to_boundary(a);
    let p = (-2.0 * d0 * d1 / dt).exp();
    p > 1e-300 && rng.random::<f64>() < p
}

/// Walks from `x0` until exit, calling `visit(cell, ΔF)` for each step
/// taken inside; returns the number of such steps.
fn walk(
    clock: &ClockField,
    x0: Point,
    dt: f64,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(Option<usize>, f64, [f64; 2]),
) -> Result<usize> {
    let spec = &clock.grid.spec;
    let sd = dt.sqrt();
    let mut x = x0;
    for k in 0..MAX_STEPS {
        let (rate, cell) = clock.rate_at(x);
        let step = gaussian_step(rng, sd);
        visit(cell, rate * dt, step);
        let y = [x[0] + step[0], x[1] + step[1]];
        if crossed(rng, spec, x, y, dt) {
            return Ok(k + 1);
        }
        x = y;
    }
    Err(LqgError::numerical(format!("walk did not exit within {MAX_STEPS} steps")))
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One clock path from `x0`, stopped at exit from the domain.
pub fn simulate_clock_path(clock: &ClockField, x0: Point, dt: f64, seed: u64) -> Result<ClockPath> {
    check_dt(&clock.grid, dt)?;
    if !clock.grid.spec.contains(x0) {
        return Err(LqgError::domain(format!("start {x0:?} is not inside the domain")));
    }
    let mut rng = path_rng(seed, 0);
    let mut steps = Vec::new();
    let mut incs = Vec::new();
    let exit_step = walk(clock, x0, dt, &mut rng, |_, df, s| {
        steps.push(s);
        incs.push(df);
    })?;
    let f_total = incs.iter().sum();
    Ok(ClockPath { start: x0, dt, steps, clock_increments: incs, exit_step, f_total })
}

/// Test function for the occupation formula.
#[derive(Debug, Clone)]
pub enum TestFunction {
    Constant(f64),
    /// One value per kept cell; zero elsewhere.
    PerCell(Vec<f64>),
}

impl TestFunction {
    fn at(&self, cell: Option<usize>) -> f64 {
        match (self, cell) {
            (TestFunction::Constant(c), _) => *c,
            (TestFunction::PerCell(v), Some(i)) => v[i],
            (TestFunction::PerCell(_), None) => 0.0,
        }
    }

    fn cell_value(&self, i: usize) -> f64 {
        self.at(Some(i))
    }

    /// Indicator of the grid points inside `[lo, hi]` (componentwise).
    pub fn indicator_box(grid: &DomainGrid, lo: Point, hi: Point) -> Self {
        TestFunction::PerCell(
            grid.points
                .iter()
                .map(|x| f64::from(u8::from((lo[0]..=hi[0]).contains(&x[0]) && (lo[1]..=hi[1]).contains(&x[1]))))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupationResult {
    pub paths: usize,
    pub mc: f64,
    pub se: f64,
    pub target: f64,
    pub z: f64,
    pub start_index: usize,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Monte Carlo `E[Σ f(X) ΔF]` against the quadrature `Σ_j g(x₀, x_j) f_j μ_j`.
pub fn occupation_check(
    clock: &ClockField,
    weights: &[f64],
    x0: Point,
    f: &TestFunction,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<OccupationResult> {
    let grid = &clock.grid;
    check_dt(grid, dt)?;
    if n_paths < 2 {
        return Err(LqgError::config("occupation check needs at least 2 paths"));
    }
    if let TestFunction::PerCell(v) = f {
        if v.len() != grid.len() || v.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(LqgError::config("per-cell test function must be finite, nonnegative and one per point"));
        }
    }
    let i0 = grid.nearest_point(x0);
    let start = grid.points[i0];
    let offset = ((start[0] - x0[0]).powi(2) + (start[1] - x0[1]).powi(2)).sqrt();
    let mut diagnostics = Vec::new();
    if offset > 0.0 {
        log::info!("occupation start snapped to grid point {i0} (offset {offset:.3e})");
        diagnostics.push(Diagnostic::Snapped { offset });
    }
    let target: f64 = (0..grid.len()).map(|j| grid.green[(i0, j)] * f.cell_value(j) * weights[j]).sum();
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let mut acc = 0.0;
            walk(clock, start, dt, &mut rng, |cell, df, _| acc += f.at(cell) * df)?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let (mc, var) = crate::stats::mean_var(&samples);
    let se = (var / n_paths as f64).sqrt();
    let z = if se > 0.0 { (mc - target) / se } else if mc == target { 0.0 } else { f64::INFINITY };
    Ok(OccupationResult { paths: n_paths, mc, se, target, z, start_index: i0, diagnostics })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeSample {
    pub x: Point,
    pub u: f64,
    pub stayed_inside: bool,
    pub f_u: f64,
    pub max_displacement: f64,
}

/// Brownian bridge `x → x` of duration `u`, `b_k = x + W_k - (k/N) W_N`.
pub fn sample_bridge(clock: &ClockField, x: Point, u: f64, dt: f64, seed: u64) -> Result<BridgeSample> {
    bridge_with(clock, x, u, dt, &mut path_rng(seed, 0))
}

fn bridge_with(clock: &ClockField, x: Point, u: f64, dt: f64, rng: &mut ChaCha8Rng) -> Result<BridgeSample> {
    if !(u > 0.0 && dt > 0.0 && dt <= u / 16.0 * (1.0 + 1e-12)) {
        return Err(LqgError::config(format!("bridge needs u > 0 and 0 < dt <= u/16, got u = {u}, dt = {dt}")));
    }
    let n = (u / dt).ceil() as usize;
    let h = u / n as f64;
    let sd = h.sqrt();
    let mut w = Vec::with_capacity(n + 1);
    w.push([0.0, 0.0]);
    for _ in 0..n {
        let s = gaussian_step(rng, sd);
        let last = w[w.len() - 1];
        w.push([last[0] + s[0], last[1] + s[1]]);
    }
    let wn = w[n];
    let spec = &clock.grid.spec;
    let mut stayed = spec.contains(x);
    let mut f_u = 0.0;
    let mut max_disp = 0.0f64;
    let mut prev = x;
    for (k, wk) in w.iter().enumerate().skip(1) {
        let frac = k as f64 / n as f64;
        let b = [x[0] + wk[0] - frac * wn[0], x[1] + wk[1] - frac * wn[1]];
        max_disp = max_disp.max(((b[0] - x[0]).powi(2) + (b[1] - x[1]).powi(2)).sqrt());
        if stayed {
            f_u += clock.rate_at(prev).0 * h;
            if crossed(rng, spec, prev, b, h) {
                stayed = false;
            }
        }
        prev = b;
    }
    Ok(BridgeSample { x, u, stayed_inside: stayed, f_u: if stayed { f_u } else { 0.0 }, max_displacement: max_disp })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeCheck {
    pub lambda: f64,
    pub mc: f64,
    pub se: f64,
    pub spectral: f64,
    pub rel_gap: f64,
    pub n_bridges: usize,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
}

/// `Σ_n f_n(x_i)² / (λ_n + λ)²`.
pub fn bridge_spectral_side(spec: &LiouvilleSpectrum, i: usize, lambda: f64) -> Result<f64> {
    let f = spec.eigfuncs()?;
    Ok((0..spec.len()).rev().map(|n| f[(i, n)].powi(2) / (spec.lambdas[n] + lambda).powi(2)).sum())
}

/// Bridge Monte Carlo for `∫ t e^{-λt} p_t(x, x) dt` at grid point `i`,
/// integrated over `u_grid` by the trapezoid rule, against the spectral form.
#[allow(clippy::too_many_arguments)]
pub fn bridge_identity_check(
    clock: &ClockField,
    spec: &LiouvilleSpectrum,
    i: usize,
    lambda: f64,
    n_bridges: usize,
    u_grid: &[f64],
    dt: f64,
    seed: u64,
) -> Result<BridgeCheck> {
    if u_grid.len() < 2 || u_grid.windows(2).any(|w| w[1] <= w[0]) || u_grid[0] <= 0.0 {
        return Err(LqgError::config("bridge u grid must be positive, increasing and have at least 2 nodes"));
    }
    let per_node = (n_bridges / u_grid.len()).max(2);
    let x = clock.grid.points[i];
    let weights: Vec<f64> = (0..u_grid.len())
        .map(|k| {
            let left = if k > 0 { u_grid[k] - u_grid[k - 1] } else { 0.0 };
            let right = if k + 1 < u_grid.len() { u_grid[k + 1] - u_grid[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let nodes: Vec<(f64, f64)> = u_grid
        .par_iter()
        .enumerate()
        .map(|(k, &u)| {
            let step = dt.min(u / 16.0);
            let vals: Vec<f64> = (0..per_node)
                .map(|b| {
                    let mut rng = path_rng(seed, (k * per_node + b) as u64);
                    let s = bridge_with(clock, x, u, step, &mut rng)?;
                    Ok(if s.stayed_inside { s.f_u * (-lambda * s.f_u).exp() } else { 0.0 })
                })
                .collect::<Result<_>>()?;
            let (m, v) = crate::stats::mean_var(&vals);
            let p = classical_heat_kernel_diag(&clock.grid.spec, x, u);
            Ok((m * p, v * p * p / per_node as f64))
        })
        .collect::<Result<_>>()?;
    let mc: f64 = nodes.iter().zip(&weights).map(|((m, _), w)| m * w).sum();
    let se = nodes.iter().zip(&weights).map(|((_, v), w)| v * w * w).sum::<f64>().sqrt();
    let spectral = bridge_spectral_side(spec, i, lambda)?;
    let rel_gap = (mc - spectral).abs() / spectral;
    let mut diagnostics = Vec::new();
    if mc > 0.0 && se / mc > 0.25 {
        diagnostics.push(Diagnostic::Inconclusive { rel_se: se / mc });
    }
    Ok(BridgeCheck { lambda, mc, se, spectral, rel_gap, n_bridges: per_node * u_grid.len(), diagnostics })
}

/// Diagonal `p^Σ_u(x, x)` of killed standard Brownian motion.
pub fn classical_heat_kernel_diag(spec: &DomainSpec, x: Point, u: f64) -> f64 {
    match spec.kind {
        DomainKind::Disc => disc_heat_kernel_diag(x, u),
        DomainKind::Square => square_heat_kernel_diag(x, u),
    }
}

/// Unit disc: first image charge for small `u`, Bessel eigenseries otherwise.
pub fn disc_heat_kernel_diag(x: Point, u: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    if r >= 1.0 {
        return 0.0;
    }
    if u < DISC_SERIES_SWITCH {
        let d = 1.0 - r;
        return (1.0 - (-2.0 * d * d / u).exp()) / (2.0 * PI * u);
    }
    // Terms with j²u/2 > 40 are below e^{-40} relative to the leading one.
    let j_max = (80.0 / u).sqrt();
    bessel_zero_table(j_max)
        .into_iter()
        .map(|(m, j)| {
            let mult = if m == 0 { 1.0 } else { 2.0 };
            mult * bessel_jn(m, j * r).powi(2) / (PI * bessel_jn(m + 1, j).powi(2)) * (-j * j * u / 2.0).exp()
        })
        .sum()
}

/// Unit square: product of one-dimensional image sums.
pub fn square_heat_kernel_diag(x: Point, u: f64) -> f64 {
    let one_d = |a: f64| {
        let phi = |z: f64| (-z * z / (2.0 * u)).exp() / (2.0 * PI * u).sqrt();
        (-6i32..=6).map(|k| phi(2.0 * k as f64) - phi(2.0 * a + 2.0 * k as f64)).sum::<f64>()
    };
    one_d(x[0]) * one_d(x[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;

    fn flat_clock(spec: DomainSpec, n: usize) -> ClockField {
        let grid = Arc::new(build_grid(spec, n).unwrap());
        let zeros = vec![0.0; grid.len()];
        ClockField::new(grid, &zeros, 0.0).unwrap()
    }

    #[test]
    fn gamma_zero_clock_is_lebesgue_time() {
        let c = flat_clock(DomainSpec::disc(), 16);
        let dt = c.grid.mesh.powi(2) / 4.0;
        let p = simulate_clock_path(&c, [0.1, 0.0], dt, 9).unwrap();
        assert!(p.clock_increments.iter().all(|&d| d == dt));
        assert!((p.f_total - p.exit_step as f64 * dt).abs() < 1e-12);
        let q = simulate_clock_path(&c, [0.1, 0.0], dt, 9).unwrap();
        assert_eq!(p.steps, q.steps);
        assert!(simulate_clock_path(&c, [0.1, 0.0], dt * 2.0, 9).is_err());
        assert!(simulate_clock_path(&c, [1.1, 0.0], dt, 9).is_err());
    }

    #[test]
    fn mean_exit_time_from_centre() {
        let c = flat_clock(DomainSpec::disc(), 32);
        let dt = c.grid.mesh.powi(2) / 4.0;
        let w = vec![c.grid.cell_area; c.grid.len()];
        let r = occupation_check(&c, &w, [0.0, 0.0], &TestFunction::Constant(1.0), 4000, dt, 1).unwrap();
        assert!(((r.mc - 0.5) / r.se).abs() < 3.0, "{r:?}");
        assert!((r.target - 0.5).abs() < 0.02, "{r:?}");
        assert!(r.diagnostics.is_empty());
        let zero = occupation_check(&c, &w, [0.0, 0.0], &TestFunction::Constant(0.0), 10, dt, 1).unwrap();
        assert_eq!((zero.mc, zero.target, zero.z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn snapping_is_reported() {
        let c = flat_clock(DomainSpec::disc(), 16);
        let w = vec![c.grid.cell_area; c.grid.len()];
        let dt = c.grid.mesh.powi(2) / 4.0;
        let r = occupation_check(&c, &w, [0.01, 0.0], &TestFunction::Constant(1.0), 4, dt, 1).unwrap();
        assert!(matches!(r.diagnostics[0], Diagnostic::Snapped { .. }));
    }

    #[test]
    fn bridge_returns_to_start() {
        let c = flat_clock(DomainSpec::disc(), 16);
        let b = sample_bridge(&c, [0.0, 0.0], 0.01, 0.01 / 64.0, 3).unwrap();
        if b.stayed_inside {
            assert!((b.f_u - 0.01).abs() < 1e-12);
        }
        assert!(sample_bridge(&c, [0.0, 0.0], 0.01, 0.01, 3).is_err());
        // the last bridge point is x itself
        let mut rng = path_rng(4, 0);
        let s = bridge_with(&c, [0.2, 0.1], 0.02, 0.001, &mut rng).unwrap();
        assert_eq!(s.x, [0.2, 0.1]);
    }

    #[test]
    fn bridge_range_scales_with_root_duration() {
        let c = flat_clock(DomainSpec::disc(), 16);
        let mean_range = |u: f64| {
            (0..400).map(|s| sample_bridge(&c, [0.0, 0.0], u, u / 64.0, s).unwrap().max_displacement).sum::<f64>()
                / 400.0
        };
        let ratio = mean_range(0.004) / mean_range(0.001);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn disc_kernel_branches_agree() {
        for x in [[0.0, 0.0], [0.5, 0.0], [0.2, -0.3]] {
            let series = {
                let r = (x[0] as f64).hypot(x[1]);
                let j_max = (80.0 / DISC_SERIES_SWITCH).sqrt();
                bessel_zero_table(j_max)
                    .into_iter()
                    .map(|(m, j)| {
                        let mult = if m == 0 { 1.0 } else { 2.0 };
                        mult * bessel_jn(m, j * r).powi(2) / (PI * bessel_jn(m + 1, j).powi(2))
                            * (-j * j * DISC_SERIES_SWITCH / 2.0).exp()
                    })
                    .sum::<f64>()
            };
            let image = disc_heat_kernel_diag(x, DISC_SERIES_SWITCH * (1.0 - 1e-12));
            assert!((series - image).abs() / series < 0.03, "{x:?}: {series} vs {image}");
        }
    }

    #[test]
    fn disc_kernel_large_time_mode() {
        let j = crate::chaos::J0_FIRST_ZERO;
        let u = 3.0;
        let lead = (-j * j * u / 2.0).exp() / (PI * bessel_jn(1, j).powi(2));
        assert!((disc_heat_kernel_diag([0.0, 0.0], u) / lead - 1.0).abs() < 1e-6);
    }

    #[test]
    fn square_kernel_against_eigenseries() {
        let x = [0.3, 0.6];
        for u in [0.01, 0.1, 0.5] {
            let mut s = 0.0;
            for m in 1..200 {
                for n in 1..200 {
                    let e = PI * PI * ((m * m + n * n) as f64) / 2.0;
                    s += 4.0 * (m as f64 * PI * x[0]).sin().powi(2) * (n as f64 * PI * x[1]).sin().powi(2) * (-e * u).exp();
                }
            }
            assert!((square_heat_kernel_diag(x, u) - s).abs() < 1e-9 * s.max(1.0), "u = {u}");
        }
    }

    #[test]
    fn single_mode_spectral_side() {
        let f = faer::Mat::from_fn(1, 1, |_, _| 2.0);
        let s = LiouvilleSpectrum {
            lambdas: vec![3.0],
            op_eigenvalues: vec![1.0 / 3.0],
            eigfuncs: Some(f),
            weights: vec![0.25],
            total_mass: 0.25,
            clamped: 0,
        };
        assert!((bridge_spectral_side(&s, 0, 1.0).unwrap() - 4.0 / 16.0).abs() < 1e-15);
    }
}
