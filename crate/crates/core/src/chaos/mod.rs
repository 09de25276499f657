//! Quantum-chaos diagnostics: level spacings, eigenfunction equidistribution
//! and random-wave autocorrelation.

pub mod bessel;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::domain::{DomainGrid, Point};
use crate::error::{LqgError, Result};
use crate::field::CouplingParams;
use crate::spectral::{window_indices, LiouvilleSpectrum};

pub use bessel::{bessel_j0, bessel_jn, bessel_zeros, J0_FIRST_ZERO};

/// Minimum eigenvalue count in a spacing window.
pub const MIN_SPACING_WINDOW: usize = 100;
/// Autocorrelation bins with fewer pairs are dropped.
pub const MIN_BIN_PAIRS: usize = 20;
/// Default macro-partition for equidistribution.
pub const DEFAULT_PARTITION: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpacingStats {
    pub gaps: Vec<f64>,
    pub ks_goe: f64,
    pub ks_poisson: f64,
    pub mean_gap: f64,
}

/// `1 - exp(-πs²/4)`.
pub fn wigner_surmise_cdf(s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(LqgError::domain(format!("spacing must be nonnegative, got {s}")));
    }
    Ok(1.0 - (-PI * s * s / 4.0).exp())
}

pub fn poisson_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        1.0 - (-s).exp()
    }
}

/// Two-sided Kolmogorov–Smirnov distance `sup |F_n - F|`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (k, &x)| {
        let f = cdf(x);
        d.max((k + 1) as f64 / n - f).max(f - k as f64 / n)
    })
}

/// Gaps unfolded by the theoretical Weyl density `c_γ μ(Σ)`.
pub fn unfold_gaps(spec: &LiouvilleSpectrum, params: &CouplingParams, window_frac: (f64, f64)) -> Result<SpacingStats> {
    spacing_from_lambdas(&spec.lambdas, params.weyl_const * spec.total_mass, window_frac)
}

pub fn spacing_from_lambdas(lambdas: &[f64], density: f64, window_frac: (f64, f64)) -> Result<SpacingStats> {
    let (lo, hi) = window_indices(lambdas.len(), window_frac)?;
    if hi < lo || hi - lo + 1 < MIN_SPACING_WINDOW {
        return Err(LqgError::config(format!(
            "spacing window [{lo}, {hi}] holds fewer than {MIN_SPACING_WINDOW} eigenvalues"
        )));
    }
    let gaps: Vec<f64> = (lo..hi).map(|n| density * (lambdas[n] - lambdas[n - 1])).collect();
    Ok(spacing_stats(gaps))
}

pub fn spacing_stats(gaps: Vec<f64>) -> SpacingStats {
    let ks_goe = ks_distance(&gaps, |s| wigner_surmise_cdf(s.max(0.0)).unwrap_or(0.0));
    let ks_poisson = ks_distance(&gaps, poisson_cdf);
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    SpacingStats { gaps, ks_goe, ks_poisson, mean_gap }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueReport {
    pub n: usize,
    pub tv_distance: f64,
    pub ipr: f64,
}

/// Equidistribution of `|f_n|²μ` against `μ/μ(Σ)` on a `k×k` partition of
/// the bounding box.
pub fn que_divergence(spec: &LiouvilleSpectrum, grid: &DomainGrid, n: usize, partition_k: usize) -> Result<QueReport> {
    let f = spec.eigfunc(n)?;
    let mut report = que_metrics(&f, &spec.weights, &grid.points, grid.spec.bounding_box(), partition_k)?;
    report.n = n;
    Ok(report)
}

/// Metrics for an arbitrary vector `f` on weighted points; `n` is left 0.
pub fn que_metrics(f: &[f64], weights: &[f64], points: &[Point], bbox: (Point, f64), k: usize) -> Result<QueReport> {
    if k < 2 {
        return Err(LqgError::config(format!("partition must be at least 2x2, got {k}")));
    }
    let (origin, side) = bbox;
    let macro_of = |x: Point| {
        let a = (((x[0] - origin[0]) / side * k as f64) as usize).min(k - 1);
        let b = (((x[1] - origin[1]) / side * k as f64) as usize).min(k - 1);
        a * k + b
    };
    let mut p = vec![0.0; k * k];
    let mut q = vec![0.0; k * k];
    let (mut f2, mut f4, mut total) = (0.0, 0.0, 0.0);
    for ((&fi, &w), &x) in f.iter().zip(weights).zip(points) {
        let c = macro_of(x);
        p[c] += fi * fi * w;
        q[c] += w;
        f2 += fi * fi * w;
        f4 += fi.powi(4) * w;
        total += w;
    }
    let tv = 0.5 * p.iter().zip(&q).map(|(a, b)| (a / f2 - b / total).abs()).sum::<f64>();
    Ok(QueReport { n: 0, tv_distance: tv.clamp(0.0, 1.0), ipr: f4 / (f2 * f2) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerryProfile {
    pub radii: Vec<f64>,
    pub autocorr: Vec<f64>,
    pub k_fit: f64,
    pub misfit: f64,
    pub dropped: usize,
}

impl BerryProfile {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if self.dropped > 0 {
            d.push(Diagnostic::DroppedBins { count: self.dropped });
        }
        if !self.k_fit.is_finite() {
            d.push(Diagnostic::NoZeroCrossing);
        }
        d
    }
}

/// Radius of the neighbourhood of the centre whose points anchor pairs.
pub const BERRY_WINDOW: f64 = 0.25;

/// Autocorrelation of `f_n` around `center`, fitted to `J₀(k r)`.
pub fn berry_autocorr(
    spec: &LiouvilleSpectrum,
    grid: &DomainGrid,
    n: usize,
    center: Point,
    radii: &[f64],
) -> Result<BerryProfile> {
    let f = spec.eigfunc(n)?;
    berry_profile(&f, &grid.points, grid.mesh, center, radii)
}

/// Bins are centred on `radii` with width equal to their smallest spacing.
pub fn berry_profile(f: &[f64], points: &[Point], mesh: f64, center: Point, radii: &[f64]) -> Result<BerryProfile> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > mesh && r < 0.2)) {
        return Err(LqgError::config(format!("autocorrelation radii must lie in ({mesh}, 0.2)")));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let width = sorted.windows(2).map(|w| w[1] - w[0]).fold(mesh, f64::min);
    let anchors: Vec<usize> = (0..points.len()).filter(|&i| dist(points[i], center) <= BERRY_WINDOW).collect();
    let var: f64 = anchors.iter().map(|&i| f[i] * f[i]).sum::<f64>() / anchors.len().max(1) as f64;

    let mut sums = vec![0.0; sorted.len()];
    let mut counts = vec![0usize; sorted.len()];
    for &i in &anchors {
        for (j, &y) in points.iter().enumerate() {
            let d = dist(points[i], y);
            let b = sorted.partition_point(|&r| r < d - 0.5 * width);
            if b < sorted.len() && (sorted[b] - d).abs() <= 0.5 * width {
                sums[b] += f[i] * f[j];
                counts[b] += 1;
            }
        }
    }
    let mut out_r = Vec::new();
    let mut out_a = Vec::new();
    let mut dropped = 0;
    for b in 0..sorted.len() {
        if counts[b] < MIN_BIN_PAIRS || var == 0.0 {
            dropped += 1;
            continue;
        }
        out_r.push(sorted[b]);
        out_a.push(sums[b] / counts[b] as f64 / var);
    }
    let k_fit = first_zero(&out_r, &out_a).map_or(f64::NAN, |r0| J0_FIRST_ZERO / r0);
    let misfit = if k_fit.is_finite() {
        (out_r.iter().zip(&out_a).map(|(r, a)| (a - bessel_j0(k_fit * r)).powi(2)).sum::<f64>() / out_r.len() as f64)
            .sqrt()
    } else {
        f64::NAN
    };
    Ok(BerryProfile { radii: out_r, autocorr: out_a, k_fit, misfit, dropped })
}

// First sign change of a profile that starts at 1 at r = 0, by linear interpolation.
fn first_zero(r: &[f64], a: &[f64]) -> Option<f64> {
    let mut prev = (0.0, 1.0);
    for (&x, &y) in r.iter().zip(a) {
        if y <= 0.0 {
            return Some(prev.0 + (x - prev.0) * prev.1 / (prev.1 - y));
        }
        prev = (x, y);
    }
    None
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
