//! Discrete Dirichlet Gaussian free field and its lattice multiplicative chaos.
//!
//! The field covariance is `C = π·g`, so that `C(x, y) = -log|x - y| + O(1)`
//! and the chaos is non-degenerate exactly for `γ < 2`. The Green operator
//! itself keeps the unscaled `g`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{DomainGrid, Point};
use crate::error::{LqgError, Result};

/// Diagonal jitter ladder tried in order when factorising the covariance.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub gamma: f64,
    /// `Q = 2/γ + γ/2`, undefined at `γ = 0`.
    pub q_param: Option<f64>,
    /// Weyl constant `c_γ = 1 / (π (2 - γ²/2))`.
    pub weyl_const: f64,
}

impl CouplingParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&gamma) {
            return Err(LqgError::config(format!("gamma must lie in [0, 2), got {gamma}")));
        }
        Ok(CouplingParams {
            gamma,
            q_param: (gamma > 0.0).then(|| 2.0 / gamma + gamma / 2.0),
            weyl_const: weyl_constant(gamma),
        })
    }
}

pub fn weyl_constant(gamma: f64) -> f64 {
    1.0 / (PI * (2.0 - gamma * gamma / 2.0))
}

/// Field covariance on a grid with its lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub grid: Arc<DomainGrid>,
    pub cov: Mat<f64>,
    pub factor: Mat<f64>,
    pub jitter_used: f64,
}

pub fn build_covariance(grid: Arc<DomainGrid>) -> Result<CovarianceModel> {
    let p = grid.len();
    let cov = Mat::from_fn(p, p, |i, j| PI * grid.green[(i, j)]);
    let (factor, jitter_used) = factorize_with_jitter(&cov)?;
    Ok(CovarianceModel { grid, cov, factor, jitter_used })
}

/// Cholesky factorisation with the smallest sufficient jitter from the ladder.
pub fn factorize_with_jitter(cov: &Mat<f64>) -> Result<(Mat<f64>, f64)> {
    let p = cov.nrows();
    for &jitter in &JITTER_LADDER {
        let shifted = Mat::from_fn(p, p, |i, j| cov[(i, j)] + if i == j { jitter } else { 0.0 });
        if let Ok(llt) = shifted.llt(Side::Lower) {
            let l = llt.L();
            return Ok((Mat::from_fn(p, p, |i, j| if i >= j { l[(i, j)] } else { 0.0 }), jitter));
        }
    }
    let min_eig = cov
        .self_adjoint_eigenvalues(Side::Lower)
        .map(|ev| ev.first().copied().unwrap_or(f64::NAN))
        .unwrap_or(f64::NAN);
    Err(LqgError::numerical(format!(
        "covariance factorisation failed at maximal jitter {:e}; most negative eigenvalue ≈ {min_eig:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// One realisation of the discrete field.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub model: Arc<CovarianceModel>,
}

/// `h = L z` with `z` i.i.d. standard normals drawn from a ChaCha8 stream
/// seeded by `seed`.
pub fn sample_gff(model: &Arc<CovarianceModel>, seed: u64) -> FieldSample {
    let p = model.factor.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    // Plain loop keeps the summation order fixed across machines.
    let l = &model.factor;
    let values = (0..p)
        .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
        .collect();
    FieldSample { values, seed, model: Arc::clone(model) }
}

/// Positive cell weights approximating the Liouville measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcMeasure {
    pub weights: Vec<f64>,
    pub total: f64,
    pub gamma: f64,
}

impl GmcMeasure {
    pub fn from_weights(weights: Vec<f64>, gamma: f64) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(LqgError::numerical("measure weights must be positive and finite"));
        }
        let total = weights.iter().sum();
        Ok(GmcMeasure { weights, total, gamma })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The same measure multiplied by a positive constant.
    pub fn scaled(&self, a: f64) -> GmcMeasure {
        GmcMeasure {
            weights: self.weights.iter().map(|w| w * a).collect(),
            total: self.total * a,
            gamma: self.gamma,
        }
    }
}

/// Lattice chaos `μ_i = cell_area · ε^{γ²/2} · exp(γ h_i)`.
pub fn gmc_weights(field: &FieldSample, params: &CouplingParams) -> GmcMeasure {
    let grid = &field.model.grid;
    gmc_from_values(&field.values, grid.cell_area, grid.mesh, params.gamma)
}

pub fn gmc_from_values(values: &[f64], cell_area: f64, mesh: f64, gamma: f64) -> GmcMeasure {
    let scale = cell_area * mesh.powf(gamma * gamma / 2.0);
    let weights: Vec<f64> = values.iter().map(|h| scale * (gamma * h).exp()).collect();
    let total = weights.iter().sum();
    GmcMeasure { weights, total, gamma }
}

/// For each radius, the largest mass of a closed ball centred at a grid point.
pub fn ball_mass_profile(measure: &GmcMeasure, points: &[Point], radii: &[f64]) -> Vec<f64> {
    radii
        .iter()
        .map(|&r| {
            let r2 = r * r;
            points
                .iter()
                .map(|c| {
                    points
                        .iter()
                        .zip(&measure.weights)
                        .filter(|(x, _)| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) <= r2)
                        .map(|(_, w)| w)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Exponent `q` in `sup_x μ(B(x, r)) ≈ C r^q` from a log-log least-squares fit.
pub fn fit_ball_exponent(radii: &[f64], masses: &[f64]) -> f64 {
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    crate::stats::linear_fit(&lx, &ly).0
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"LQGF";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Field snapshot: magic `LQGF`, version `u32`, count `u32`, then the field
/// values and the measure weights as little-endian `f64`.
pub fn write_snapshot<W: Write>(mut w: W, values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(LqgError::config("snapshot field and weight lengths differ"));
    }
    let count = u32::try_from(values.len()).map_err(|_| LqgError::config("too many points for snapshot"))?;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for v in values.iter().chain(weights) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if &head[..4] != SNAPSHOT_MAGIC {
        return Err(LqgError::Format("bad snapshot magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(LqgError::Format(format!("unsupported snapshot version {version}")));
    }
    let count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; 16 * count];
    r.read_exact(&mut buf)?;
    let floats: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (h, mu) = floats.split_at(count);
    Ok((h.to_vec(), mu.to_vec()))
}

pub fn save_snapshot(path: &Path, values: &[f64], weights: &[f64]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(f), values, weights)
}

pub fn load_snapshot(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, KAPPA0};

    fn disc(n: usize) -> Arc<CovarianceModel> {
        Arc::new(build_covariance(Arc::new(build_grid(DomainSpec::disc(), n).unwrap())).unwrap())
    }

    #[test]
    fn coupling_constants() {
        let c0 = CouplingParams::new(0.0).unwrap();
        assert!(c0.q_param.is_none());
        assert!((c0.weyl_const - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let c1 = CouplingParams::new(1.0).unwrap();
        assert!((c1.weyl_const - 0.212_206_590_789_193_8).abs() < 1e-12);
        assert!((c1.q_param.unwrap() - 2.5).abs() < 1e-15);
        assert!((CouplingParams::new(2f64.sqrt()).unwrap().weyl_const - 1.0 / PI).abs() < 1e-12);
        assert!(CouplingParams::new(2.0).is_err());
        assert!(CouplingParams::new(-0.1).is_err());
        let mut prev = 0.0;
        for k in 0..20 {
            let c = weyl_constant(k as f64 * 0.099);
            assert!(c >= 1.0 / (2.0 * PI) - 1e-15 && c > prev);
            prev = c;
        }
    }

    #[test]
    fn single_point_factor() {
        let cov = Mat::from_fn(1, 1, |_, _| PI * 0.7);
        let (l, jitter) = factorize_with_jitter(&cov).unwrap();
        assert_eq!(jitter, 0.0);
        assert!((l[(0, 0)] - (PI * 0.7f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn indefinite_covariance_reports_eigenvalue() {
        let cov = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        match factorize_with_jitter(&cov) {
            Err(LqgError::Numerical(msg)) => assert!(msg.contains("-1e0") || msg.contains("-1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disc_covariance_is_well_conditioned() {
        let m = disc(16);
        assert!(m.jitter_used <= 1e-8);
        let p = m.cov.nrows();
        let rec = &m.factor * m.factor.transpose();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..p {
            for j in 0..p {
                num += (rec[(i, j)] - m.cov[(i, j)]).powi(2);
                den += m.cov[(i, j)].powi(2);
            }
        }
        assert!((num / den).sqrt() < 1e-8);
        for (k, x) in m.grid.points.iter().enumerate() {
            let want = (1.0 / m.grid.mesh).ln() + KAPPA0 + m.grid.conf_radius[k].ln();
            assert!((m.cov[(k, k)] - want).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = disc(12);
        let a = sample_gff(&m, 42);
        let b = sample_gff(&m, 42);
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(a.values, sample_gff(&m, 43).values);
    }

    #[test]
    fn gmc_degenerates_at_gamma_zero() {
        let m = disc(12);
        let f = sample_gff(&m, 1);
        let mu = gmc_weights(&f, &CouplingParams::new(0.0).unwrap());
        assert!(mu.weights.iter().all(|&w| w == m.grid.cell_area));
    }

    #[test]
    fn gmc_formula() {
        let eps = 1.0 / 64.0;
        let mu = gmc_from_values(&[1.0], eps * eps, eps, 1.0);
        let want = eps.powf(2.5) * 1f64.exp();
        assert!((mu.weights[0] - want).abs() < 1e-15 * want.max(1.0));
    }

    #[test]
    fn ball_profile_limits() {
        let grid = build_grid(DomainSpec::disc(), 24).unwrap();
        let lebesgue = GmcMeasure::from_weights(vec![grid.cell_area; grid.len()], 0.0).unwrap();
        let prof = ball_mass_profile(&lebesgue, &grid.points, &[2.0, 0.3]);
        assert!((prof[0] - lebesgue.total).abs() < 1e-12);
        let r = 0.3;
        assert!((prof[1] - PI * r * r).abs() < 2.0 * PI * r * grid.mesh);
    }

    #[test]
    fn snapshot_rejects_bad_magic() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(&buf[..4], b"LQGF");
        assert_eq!(buf.len(), 12 + 32);
        let (h, mu) = read_snapshot(&buf[..]).unwrap();
        assert_eq!((h, mu), (vec![1.0, 2.0], vec![3.0, 4.0]));
        buf[0] = b'X';
        assert!(matches!(read_snapshot(&buf[..]), Err(LqgError::Format(_))));
    }
}
