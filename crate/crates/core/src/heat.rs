//! Heat traces, the spectral heat kernel and their asymptotics.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::diagnostics::Diagnostic;
use crate::error::{LqgError, Result};
use crate::spectral::LiouvilleSpectrum;
use crate::stats::{linear_fit, logspace, mean_var};

/// Minimum number of times for plateau detection.
pub const MIN_PLATEAU_POINTS: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub scaled: Vec<f64>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(LqgError::config(format!("heat times must be positive, got {t}")));
    }
    Ok(())
}

/// `H(t) = Σ_n e^{-λ_n t}`, smallest terms first.
pub fn heat_trace(spec: &LiouvilleSpectrum, times: &[f64]) -> Result<HeatTrace> {
    check_times(times)?;
    let values: Vec<f64> = times.iter().map(|&t| trace_at(&spec.lambdas, t)).collect();
    let scaled = times.iter().zip(&values).map(|(t, h)| t * h).collect();
    Ok(HeatTrace { times: times.to_vec(), values, scaled })
}

fn trace_at(lambdas: &[f64], t: f64) -> f64 {
    lambdas.iter().rev().map(|l| (-l * t).exp()).sum()
}

/// `t_k = t₀ · 10^{k/per_decade}` starting one decade below `1/λ_max`.
/// Spans `decades` decades, widened as needed so the last point is at least
/// `10/λ₁`.
pub fn default_time_grid(spec: &LiouvilleSpectrum, decades: usize, per_decade: usize) -> Result<Vec<f64>> {
    let lmax = *spec.lambdas.last().ok_or_else(|| LqgError::config("empty spectrum"))?;
    if decades == 0 || per_decade == 0 {
        return Err(LqgError::config("time grid needs at least one decade and one point per decade"));
    }
    let t0 = 0.1 / lmax;
    let needed = (100.0 * lmax / spec.lambdas[0]).log10().ceil() as usize;
    let decades = decades.max(needed);
    Ok(logspace(t0, t0 * 10f64.powi(decades as i32), decades * per_decade + 1))
}

/// `p_t(x_i, x_j) = Σ_n e^{-λ_n t} f_n(x_i) f_n(x_j)`.
pub fn spectral_heat_kernel(spec: &LiouvilleSpectrum, t: f64, i: usize, j: usize) -> Result<f64> {
    check_times(&[t])?;
    let f = spec.eigfuncs()?;
    Ok((0..spec.len()).rev().map(|n| (-spec.lambdas[n] * t).exp() * f[(i, n)] * f[(j, n)]).sum())
}

/// `Σ_i p_t(x_i, x_i) μ_i`, which must equal `H(t)`.
pub fn kernel_trace(spec: &LiouvilleSpectrum, t: f64) -> Result<f64> {
    let f = spec.eigfuncs()?;
    let mut s = 0.0;
    for (i, w) in spec.weights.iter().enumerate() {
        let d: f64 = (0..spec.len()).rev().map(|n| (-spec.lambdas[n] * t).exp() * f[(i, n)].powi(2)).sum();
        s += d * w;
    }
    Ok(s)
}

/// `max_i Σ_j p_t(x_i, x_j) μ_j`.
pub fn subprobability_check(spec: &LiouvilleSpectrum, t: f64) -> Result<f64> {
    check_times(&[t])?;
    let f = spec.eigfuncs()?;
    let p = f.nrows();
    let mass: Vec<f64> = (0..spec.len()).map(|n| (0..p).map(|j| f[(j, n)] * spec.weights[j]).sum()).collect();
    Ok((0..p)
        .map(|i| (0..spec.len()).rev().map(|n| (-spec.lambdas[n] * t).exp() * f[(i, n)] * mass[n]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KaramataResult {
    pub laplace_side: f64,
    pub counting_side: f64,
    pub rel_gap: f64,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Compares `λ^ρ ν̂(λ) / Γ(1+ρ)` with `t^{-ρ} ν([0, t])` at `t = 1/λ` for a
/// measure given by `(location, mass)` atoms.
pub fn karamata_check(atoms: &[(f64, f64)], rho: f64, lambda: f64) -> Result<KaramataResult> {
    if rho < 0.0 || lambda <= 0.0 {
        return Err(LqgError::config(format!("need rho >= 0 and lambda > 0, got ({rho}, {lambda})")));
    }
    let t = 1.0 / lambda;
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Smallest discounted atoms first.
    let transform: f64 = sorted.iter().rev().map(|(s, m)| m * (-lambda * s).exp()).sum();
    let counted: f64 = sorted.iter().filter(|(s, _)| *s <= t).map(|(_, m)| m).sum();
    let laplace_side = lambda.powf(rho) * transform / gamma(1.0 + rho);
    let counting_side = t.powf(-rho) * counted;
    let mut diagnostics = Vec::new();
    if let Some(&(s, m)) = sorted.last() {
        let last_weight = m * (-lambda * s).exp();
        if last_weight > 1e-12 * transform {
            diagnostics.push(Diagnostic::NonconvergentTail { last_weight });
        }
    }
    Ok(KaramataResult {
        laplace_side,
        counting_side,
        rel_gap: (laplace_side - counting_side).abs() / counting_side.abs().max(f64::MIN_POSITIVE),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpzExponents {
    pub euclid_x: f64,
    pub gamma: f64,
    pub delta: f64,
}

/// Root in `[0, 1]` of `(γ²/4)Δ² + (1 - γ²/4)Δ = x`.
pub fn kpz_solve(x: f64, gamma: f64) -> Result<KpzExponents> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(LqgError::config(format!("gamma must lie in [0, 2), got {gamma}")));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(LqgError::domain(format!("Euclidean exponent must lie in (0, 1], got {x}")));
    }
    let a = gamma * gamma / 4.0;
    let b = 1.0 - a;
    // Rationalised root: no cancellation as a → 0.
    let delta = 2.0 * x / (b + (b * b + 4.0 * a * x).sqrt());
    if !(0.0..=1.0 + 1e-15).contains(&delta) {
        return Err(LqgError::domain(format!("no KPZ root in [0, 1] for x = {x}, gamma = {gamma}")));
    }
    Ok(KpzExponents { euclid_x: x, gamma, delta: delta.min(1.0) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plateau {
    pub t_star: f64,
    pub value: f64,
    pub ratio: f64,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Flattest point of `t·H(t)` on the log-time grid, compared with `target`.
///
/// Flatness is measured by `|d log(tH) / d log t|`, which is scale free and
/// so is not fooled by the exponentially small tail at large `t`.
pub fn plateau_estimate(trace: &HeatTrace, target: f64) -> Result<Plateau> {
    let m = trace.times.len();
    if m < MIN_PLATEAU_POINTS {
        return Err(LqgError::config(format!("plateau detection needs {MIN_PLATEAU_POINTS} times, got {m}")));
    }
    let lt: Vec<f64> = trace.times.iter().map(|t| t.ln()).collect();
    let slope: Vec<f64> = (1..m - 1)
        .map(|k| (trace.scaled[k + 1].ln() - trace.scaled[k - 1].ln()) / (lt[k + 1] - lt[k - 1]))
        .collect();
    let k = (0..slope.len()).min_by(|&a, &b| slope[a].abs().total_cmp(&slope[b].abs())).unwrap_or(0) + 1;
    let turns = slope.windows(2).any(|w| w[0].signum() != w[1].signum());
    let value = trace.scaled[k];
    Ok(Plateau {
        t_star: trace.times[k],
        value,
        ratio: value / target,
        diagnostics: if turns { Vec::new() } else { vec![Diagnostic::NoPlateau] },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryFit {
    pub alpha: f64,
    pub prefactor: f64,
    pub used: usize,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Log-log slope of `c_est - t·H(t)` against `t` over `window`.
pub fn boundary_correction_fit(times: &[f64], scaled: &[f64], c_est: f64, window: (f64, f64)) -> Result<BoundaryFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut skipped = 0;
    for (&t, &s) in times.iter().zip(scaled) {
        if t < window.0 || t > window.1 {
            continue;
        }
        let r = c_est - s;
        if r > 0.0 {
            x.push(t.ln());
            y.push(r.ln());
        } else {
            skipped += 1;
        }
    }
    if x.len() < 3 {
        return Err(LqgError::config(format!("boundary fit window holds only {} usable times", x.len())));
    }
    let (alpha, c) = linear_fit(&x, &y);
    Ok(BoundaryFit {
        alpha,
        prefactor: c.exp(),
        used: x.len(),
        diagnostics: if skipped > 0 { vec![Diagnostic::NonpositiveResiduals { skipped }] } else { Vec::new() },
    })
}

/// `(t·p_t(x_i, x_i), λ Σ_n f_n(x_i)²/(λ_n + λ)²)` with `λ = 1/t`.
pub fn diag_sample(spec: &LiouvilleSpectrum, i: usize, t: f64) -> Result<(f64, f64)> {
    check_times(&[t])?;
    let f = spec.eigfuncs()?;
    let lambda = 1.0 / t;
    let mut heat = 0.0;
    let mut laplace = 0.0;
    for n in (0..spec.len()).rev() {
        let f2 = f[(i, n)].powi(2);
        heat += (-spec.lambdas[n] * t).exp() * f2;
        laplace += f2 / (spec.lambdas[n] + lambda).powi(2);
    }
    Ok((t * heat, lambda * laplace))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagStat {
    pub gamma: f64,
    pub t: f64,
    pub samples: Vec<f64>,
    pub laplace: Vec<f64>,
    pub mean: f64,
    pub coefficient_of_variation: f64,
}

impl DiagStat {
    pub fn from_samples(gamma: f64, t: f64, samples: Vec<f64>, laplace: Vec<f64>) -> Self {
        let (mean, var) = mean_var(&samples);
        DiagStat { gamma, t, samples, laplace, mean, coefficient_of_variation: var.sqrt() / mean }
    }
}
