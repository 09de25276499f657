//! The discretised Liouville Green operator and its spectrum.
//!
//! On the grid the Green operator acts as `f ↦ Σ_j g_ij f_j μ_j`. It is
//! diagonalised through the symmetric conjugate `M = D^{1/2} K D^{1/2}`
//! (with `D = diag(μ)`), which has the same spectrum; eigenvalues of the
//! Liouville Laplacian are the reciprocals of those of `M`.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::chaos::bessel::bessel_zero_table;
use crate::diagnostics::Diagnostic;
use crate::domain::{DomainGrid, DomainKind, DomainSpec};
use crate::error::{LqgError, Result};
use crate::field::{CouplingParams, GmcMeasure};

/// Eigenvalues of `M` below `-NEGATIVE_TOL · ‖M‖_F` abort the decomposition.
pub const NEGATIVE_TOL: f64 = 1e-8;

/// Default bulk window as fractions of the spectrum.
pub const DEFAULT_WINDOW: (f64, f64) = (0.02, 0.20);

#[derive(Debug, Clone)]
pub struct LiouvilleOperator {
    pub matrix: Mat<f64>,
    pub kernel: Arc<Mat<f64>>,
    pub weights: Vec<f64>,
    pub sqrt_weights: Vec<f64>,
}

impl LiouvilleOperator {
    /// `M_ij = √μ_i g_ij √μ_j`, upper triangle computed and mirrored.
    pub fn from_kernel(kernel: Arc<Mat<f64>>, weights: &[f64]) -> Result<Self> {
        let p = kernel.nrows();
        if kernel.ncols() != p || weights.len() != p {
            return Err(LqgError::config(format!(
                "kernel is {}x{} but the measure has {} weights",
                kernel.nrows(),
                kernel.ncols(),
                weights.len()
            )));
        }
        let sqrt_weights: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut matrix = Mat::<f64>::zeros(p, p);
        for j in 0..p {
            for i in 0..=j {
                let v = sqrt_weights[i] * kernel[(i, j)] * sqrt_weights[j];
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        Ok(LiouvilleOperator { matrix, kernel, weights: weights.to_vec(), sqrt_weights })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let p = self.dim();
        let mut s = 0.0;
        for j in 0..p {
            for i in 0..p {
                s += self.matrix[(i, j)].powi(2);
            }
        }
        s.sqrt()
    }
}

pub fn assemble_operator(grid: &DomainGrid, measure: &GmcMeasure) -> Result<LiouvilleOperator> {
    LiouvilleOperator::from_kernel(Arc::clone(&grid.green), &measure.weights)
}

/// Discrete Hilbert–Schmidt norm `√(Σ_ij g_ij² μ_i μ_j)`, computed from the
/// kernel and weights rather than from the assembled matrix.
pub fn hs_norm(op: &LiouvilleOperator) -> f64 {
    let p = op.dim();
    let mut s = 0.0;
    for j in 0..p {
        let mut col = 0.0;
        for i in 0..p {
            col += op.kernel[(i, j)].powi(2) * op.weights[i];
        }
        s += col * op.weights[j];
    }
    s.sqrt()
}

/// Ascending eigenvalues of the Liouville Laplacian with eigenfunctions
/// orthonormal in `L²(μ)`.
#[derive(Debug, Clone)]
pub struct LiouvilleSpectrum {
    /// `λ_n = 1/μ_n`, ascending.
    pub lambdas: Vec<f64>,
    /// Retained eigenvalues `μ_n` of `M`, descending.
    pub op_eigenvalues: Vec<f64>,
    /// `f_n(x_i)` in column `n`; absent for eigenvalue-only decompositions.
    pub eigfuncs: Option<Mat<f64>>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
    pub clamped: usize,
}

impl LiouvilleSpectrum {
    /// Spectrum with no eigenfunctions, e.g. re-loaded from disk or synthetic.
    pub fn from_lambdas(mut lambdas: Vec<f64>, total_mass: f64) -> Self {
        lambdas.sort_by(|a, b| a.total_cmp(b));
        let op_eigenvalues = lambdas.iter().map(|l| 1.0 / l).collect();
        LiouvilleSpectrum {
            lambdas,
            op_eigenvalues,
            eigfuncs: None,
            weights: Vec::new(),
            total_mass,
            clamped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn eigfuncs(&self) -> Result<&Mat<f64>> {
        self.eigfuncs
            .as_ref()
            .ok_or_else(|| LqgError::config("spectrum was computed without eigenfunctions"))
    }

    /// `f_n(x_i)` for 1-based `n`.
    pub fn eigfunc(&self, n: usize) -> Result<Vec<f64>> {
        let f = self.eigfuncs()?;
        if n == 0 || n > f.ncols() {
            return Err(LqgError::config(format!("eigenfunction index {n} out of range 1..={}", f.ncols())));
        }
        Ok((0..f.nrows()).map(|i| f[(i, n - 1)]).collect())
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        if self.clamped > 0 {
            vec![Diagnostic::ClampedEigenvalues { count: self.clamped }]
        } else {
            Vec::new()
        }
    }
}

/// Full symmetric eigendecomposition.
pub fn eigendecompose(op: &LiouvilleOperator) -> Result<LiouvilleSpectrum> {
    let evd = op
        .matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LqgError::numerical(format!("eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..op.dim()).map(|k| evd.S()[k]).collect();
    let vectors = evd.U();
    let keep = retained_indices(&values, op.frobenius_norm())?;
    let p = op.dim();
    let mut eigfuncs = Mat::<f64>::zeros(p, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        // Sign convention: largest-magnitude component positive, ties to the lowest index.
        let mut best = 0;
        for i in 1..p {
            if vectors[(i, k)].abs() > vectors[(best, k)].abs() {
                best = i;
            }
        }
        let sign = if vectors[(best, k)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            eigfuncs[(i, col)] = sign * vectors[(i, k)] / op.sqrt_weights[i];
        }
    }
    Ok(build_spectrum(op, &values, &keep, Some(eigfuncs)))
}

/// Eigenvalues only; cheaper when eigenfunctions are not needed.
pub fn eigenvalues_only(op: &LiouvilleOperator) -> Result<LiouvilleSpectrum> {
    let values = op
        .matrix
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| LqgError::numerical(format!("eigensolver failed: {e:?}")))?;
    let keep = retained_indices(&values, op.frobenius_norm())?;
    Ok(build_spectrum(op, &values, &keep, None))
}

// Indices into the ascending eigenvalue list, ordered by descending value,
// with roundoff-level eigenvalues dropped.
fn retained_indices(ascending: &[f64], frobenius: f64) -> Result<Vec<usize>> {
    let tol = NEGATIVE_TOL * frobenius;
    let p = ascending.len();
    let mut keep = Vec::with_capacity(p);
    let mut clamped = 0;
    for (rank, k) in (0..p).rev().enumerate() {
        let v = ascending[k];
        if v < -tol {
            return Err(LqgError::NotPositive { index: rank + 1, value: v });
        }
        if v <= 0.0 {
            clamped += 1;
            continue;
        }
        keep.push(k);
    }
    if clamped > 0 {
        log::warn!("excluded {clamped} eigenvalues within roundoff of zero");
    }
    Ok(keep)
}

fn build_spectrum(
    op: &LiouvilleOperator,
    values: &[f64],
    keep: &[usize],
    eigfuncs: Option<Mat<f64>>,
) -> LiouvilleSpectrum {
    let op_eigenvalues: Vec<f64> = keep.iter().map(|&k| values[k]).collect();
    LiouvilleSpectrum {
        lambdas: op_eigenvalues.iter().map(|m| 1.0 / m).collect(),
        op_eigenvalues,
        eigfuncs,
        weights: op.weights.clone(),
        total_mass: op.weights.iter().sum(),
        clamped: values.len() - keep.len(),
    }
}

/// `max_i |f_n(x_i) - λ_n Σ_j g_ij f_n(x_j) μ_j|` for 1-based `n`.
pub fn eigfun_smoothing_residual(spec: &LiouvilleSpectrum, op: &LiouvilleOperator, n: usize) -> Result<f64> {
    let f = spec.eigfunc(n)?;
    let lambda = spec.lambdas[n - 1];
    let p = op.dim();
    let fm: Vec<f64> = (0..p).map(|j| f[j] * op.weights[j]).collect();
    let mut worst = 0.0f64;
    for i in 0..p {
        let mut s = 0.0;
        for j in 0..p {
            s += op.kernel[(i, j)] * fm[j];
        }
        worst = worst.max((f[i] - lambda * s).abs());
    }
    Ok(worst)
}

/// `N(λ) = #{n : λ_n ≤ λ}`.
pub fn counting_function(spec: &LiouvilleSpectrum, lambda: f64) -> usize {
    spec.lambdas.partition_point(|&l| l <= lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylFit {
    /// 1-based inclusive index range.
    pub window: (usize, usize),
    pub slope: f64,
    pub discrepancy: f64,
    pub polya_fraction: f64,
    pub target: f64,
}

impl WeylFit {
    pub fn relative_error(&self) -> f64 {
        (self.slope - self.target).abs() / self.target
    }
}

/// 1-based inclusive window `[⌈lo·P⌉, ⌊hi·P⌋]`.
pub fn window_indices(len: usize, window_frac: (f64, f64)) -> Result<(usize, usize)> {
    let (lo, hi) = window_frac;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(LqgError::config(format!("window fractions must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})")));
    }
    let n_lo = ((lo * len as f64).ceil() as usize).max(1);
    let n_hi = (hi * len as f64).floor() as usize;
    Ok((n_lo, n_hi))
}

/// Least-squares slope through the origin of `N(λ_n)` against `λ_n μ(Σ)`.
pub fn weyl_fit(spec: &LiouvilleSpectrum, params: &CouplingParams, window_frac: (f64, f64)) -> Result<WeylFit> {
    let (n_lo, n_hi) = window_indices(spec.len(), window_frac)?;
    if n_hi < n_lo || n_hi - n_lo + 1 < 10 {
        return Err(LqgError::config(format!(
            "Weyl window [{n_lo}, {n_hi}] holds fewer than 10 eigenvalues"
        )));
    }
    let mass = spec.total_mass;
    let pairs: Vec<(f64, f64)> = (n_lo..=n_hi)
        .map(|n| {
            let lam = spec.lambdas[n - 1];
            (lam * mass, counting_function(spec, lam) as f64)
        })
        .collect();
    let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
    let slope = sxy / sxx;
    let discrepancy = pairs.iter().map(|(x, y)| (y - slope * x).abs()).fold(0.0, f64::max);
    let c = params.weyl_const;
    let below = pairs.iter().filter(|(x, y)| *y <= c * x * (1.0 + 1e-12)).count();
    Ok(WeylFit {
        window: (n_lo, n_hi),
        slope,
        discrepancy,
        polya_fraction: below as f64 / pairs.len() as f64,
        target: c,
    })
}

/// Smallest relative gap `(λ_{n+1} - λ_n)/λ_n` over a window.
pub fn min_relative_gap(spec: &LiouvilleSpectrum, window_frac: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window_indices(spec.len(), window_frac)?;
    Ok((lo..hi.min(spec.len() - 1))
        .map(|n| (spec.lambdas[n] - spec.lambdas[n - 1]) / spec.lambdas[n - 1])
        .fold(f64::INFINITY, f64::min))
}

/// First `count` Dirichlet eigenvalues of `-½Δ` on the reference domain.
pub fn classical_reference_spectrum(spec: &DomainSpec, count: usize) -> Vec<f64> {
    match spec.kind {
        DomainKind::Square => {
            let mut k = 8;
            loop {
                let mut v: Vec<f64> = (1..=k)
                    .flat_map(|m| (1..=k).map(move |n| PI * PI * ((m * m + n * n) as f64) / 2.0))
                    .collect();
                v.sort_by(|a, b| a.total_cmp(b));
                // Complete up to π²(k² + 1)/2: everything below is enumerated.
                let complete = PI * PI * ((k * k + 1) as f64) / 2.0;
                let n_ok = v.partition_point(|&l| l < complete);
                if n_ok >= count {
                    v.truncate(count);
                    return v;
                }
                k *= 2;
            }
        }
        DomainKind::Disc => {
            // N(λ) ≈ λ/2 on the unit disc, so j ≈ 2√count suffices; widen if short.
            let mut x_max = 2.0 * (count as f64).sqrt() + 10.0;
            loop {
                let mut v: Vec<f64> = bessel_zero_table(x_max)
                    .into_iter()
                    .flat_map(|(m, j)| std::iter::repeat_n(j * j / 2.0, if m == 0 { 1 } else { 2 }))
                    .collect();
                v.sort_by(|a, b| a.total_cmp(b));
                let complete = x_max * x_max / 2.0;
                let n_ok = v.partition_point(|&l| l <= complete);
                if n_ok >= count {
                    v.truncate(count);
                    return v;
                }
                x_max *= 1.5;
            }
        }
    }
}
