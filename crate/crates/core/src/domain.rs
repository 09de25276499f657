//! Discretised planar domains and the Dirichlet Green function of Brownian
//! motion killed on the boundary.
//!
//! Brownian motion here is the standard planar process (generator `½Δ`), so
//! its Green function is `g(x, y) = -(1/π) log|x - y| + O(1)` and the Green
//! operator inverts `-½Δ`. Diagonal entries of the assembled kernel use the
//! cell average of the logarithmic singularity.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqgError, Result};

pub type Point = [f64; 2];

/// Mean of `-log|u|` over the unit square cell `[-1/2, 1/2]²`.
///
/// Closed form `3/2 - π/4 + (log 2)/2`; the tests re-derive it by quadrature.
pub const KAPPA0: f64 = 1.061_175_426_882_524_3;

/// Smallest allowed eigenmode cutoff for the truncated square series.
pub const MIN_SERIES_CUTOFF: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    #[serde(alias = "unitdisc")]
    Disc,
    #[serde(alias = "unitsquare")]
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Eigenmodes per axis in the truncated square series. Ignored for the disc.
    #[serde(default = "default_cutoff")]
    pub series_cutoff: usize,
}

fn default_cutoff() -> usize {
    64
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::disc()
    }
}

impl DomainSpec {
    pub fn disc() -> Self {
        DomainSpec { kind: DomainKind::Disc, series_cutoff: default_cutoff() }
    }

    pub fn square(series_cutoff: usize) -> Self {
        DomainSpec { kind: DomainKind::Square, series_cutoff }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == DomainKind::Square && self.series_cutoff < MIN_SERIES_CUTOFF {
            return Err(LqgError::config(format!(
                "domain.series_cutoff must be at least {MIN_SERIES_CUTOFF}, got {}",
                self.series_cutoff
            )));
        }
        Ok(())
    }

    /// Lower-left corner and side length of the bounding box.
    pub fn bounding_box(&self) -> (Point, f64) {
        match self.kind {
            DomainKind::Disc => ([-1.0, -1.0], 2.0),
            DomainKind::Square => ([0.0, 0.0], 1.0),
        }
    }

    pub fn area(&self) -> f64 {
        match self.kind {
            DomainKind::Disc => PI,
            DomainKind::Square => 1.0,
        }
    }

    pub fn boundary_length(&self) -> f64 {
        match self.kind {
            DomainKind::Disc => 2.0 * PI,
            DomainKind::Square => 4.0,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Disc => 2.0,
            DomainKind::Square => 2f64.sqrt(),
        }
    }

    /// Euclidean distance to the boundary; negative outside the domain.
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        match self.kind {
            DomainKind::Disc => 1.0 - x[0].hypot(x[1]),
            DomainKind::Square => x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]),
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        self.distance_to_boundary(x) > 0.0
    }

    /// Green function `g(x, y)` for distinct interior points.
    pub fn green(&self, x: Point, y: Point) -> Result<f64> {
        match self.kind {
            DomainKind::Disc => green_disc(x, y),
            DomainKind::Square => green_square_exact(x, y),
        }
    }

    /// `lim_{y→x} g(x, y) + (1/π) log|x - y|`, equal to `(1/π) log R(x)`.
    pub fn harmonic_part(&self, x: Point) -> f64 {
        match self.kind {
            DomainKind::Disc => (1.0 - (x[0] * x[0] + x[1] * x[1])).ln() / PI,
            DomainKind::Square => square_harmonic_part(x),
        }
    }
}

/// Closed-form disc Green function `(1/π) log(|1 - x ȳ| / |x - y|)`.
pub fn green_disc(x: Point, y: Point) -> Result<f64> {
    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    if d2 == 0.0 {
        return Err(LqgError::Singularity);
    }
    let dot = x[0] * y[0] + x[1] * y[1];
    let nx = x[0] * x[0] + x[1] * x[1];
    let ny = y[0] * y[0] + y[1] * y[1];
    // |1 - x ȳ|² = 1 - 2 x·y + |x|²|y|²
    let num = 1.0 - 2.0 * dot + nx * ny;
    Ok((num / d2).ln() / (2.0 * PI))
}

/// Truncated Dirichlet eigenexpansion of the unit-square Green function:
/// `Σ_{m,n ≤ K} φ_mn(x) φ_mn(y) / λ_mn` with `φ_mn = 2 sin(mπx₁) sin(nπx₂)`
/// and `λ_mn = π²(m² + n²)/2`.
pub fn green_square(x: Point, y: Point, cutoff: usize) -> Result<f64> {
    if x == y {
        return Err(LqgError::Singularity);
    }
    let k = cutoff;
    let sines = |t: f64| -> Vec<f64> { (1..=k).map(|m| (m as f64 * PI * t).sin()).collect() };
    let (ax, ay, bx, by) = (sines(x[0]), sines(x[1]), sines(y[0]), sines(y[1]));
    let mut sum = 0.0;
    for m in 0..k {
        let pm = ax[m] * bx[m];
        let m2 = ((m + 1) * (m + 1)) as f64;
        let mut row = 0.0;
        for n in 0..k {
            let n2 = ((n + 1) * (n + 1)) as f64;
            row += ay[n] * by[n] / (m2 + n2);
        }
        sum += pm * row;
    }
    Ok(8.0 * sum / (PI * PI))
}

// Image rows `k ≥ 1` in the square representation carry a factor e^{-2πk}.
const SQUARE_IMAGE_ROWS: usize = 7;

/// Unit-square Green function with the horizontal mode sum done in closed
/// form. What remains is an image sum in the vertical direction whose terms
/// decay like `e^{-2πk}`, so it is exact to roundoff.
pub fn green_square_exact(x: Point, y: Point) -> Result<f64> {
    if x == y {
        return Err(LqgError::Singularity);
    }
    let theta_minus = PI * (x[0] - y[0]);
    let theta_plus = PI * (x[0] + y[0]);
    let d = (x[1] - y[1]).abs();
    let s = x[1] + y[1];
    let mut sum = 0.0;
    for k in 0..SQUARE_IMAGE_ROWS {
        let shift = 2.0 * k as f64;
        for (alpha, sign) in [(d, 1.0), (s, -1.0), (2.0 - s, -1.0), (2.0 - d, 1.0)] {
            sum += sign * log_mode_ratio(alpha + shift, theta_minus, theta_plus);
        }
    }
    Ok(sum / (2.0 * PI))
}

/// `log[(1 - 2q cos θ₊ + q²) / (1 - 2q cos θ₋ + q²)]` with `q = e^{-πα}`,
/// written to stay accurate when `q → 1` and `θ₋ → 0`.
fn log_mode_ratio(alpha: f64, theta_minus: f64, theta_plus: f64) -> f64 {
    let q = (-PI * alpha).exp();
    let one_minus_q = -(-PI * alpha).exp_m1();
    // 1 - 2q cos θ + q² = (1 - q)² + 4q sin²(θ/2)
    let quad = |theta: f64| one_minus_q * one_minus_q + 4.0 * q * (0.5 * theta).sin().powi(2);
    (quad(theta_plus) / quad(theta_minus)).ln()
}

fn square_harmonic_part(x: Point) -> f64 {
    // Singular term (α = 0, k = 0): log[(2 - 2cos 2πx₁)/(π² r²)] as r → 0.
    let mut sum = (4.0 * (PI * x[0]).sin().powi(2)).ln() - 2.0 * PI.ln();
    let theta_plus = 2.0 * PI * x[0];
    let s = 2.0 * x[1];
    for k in 0..SQUARE_IMAGE_ROWS {
        let shift = 2.0 * k as f64;
        if k > 0 {
            sum += log_mode_ratio(shift, 0.0, theta_plus);
        }
        sum -= log_mode_ratio(s + shift, 0.0, theta_plus);
        sum -= log_mode_ratio(2.0 - s + shift, 0.0, theta_plus);
        sum += log_mode_ratio(2.0 + shift, 0.0, theta_plus);
    }
    sum / (2.0 * PI)
}

/// Conformal radius `R(x, Σ)`: `1 - |x|²` on the disc, `exp(π h(x))` on the
/// square where `h` is the harmonic part of the Green function.
pub fn conformal_radius(spec: &DomainSpec, x: Point) -> Result<f64> {
    if !spec.contains(x) {
        return Err(LqgError::domain(format!("point ({}, {}) is not inside the domain", x[0], x[1])));
    }
    Ok(match spec.kind {
        DomainKind::Disc => 1.0 - (x[0] * x[0] + x[1] * x[1]),
        DomainKind::Square => (PI * square_harmonic_part(x)).exp(),
    })
}

/// Cell-averaged self-interaction for each point:
/// `g_ii = (1/π)(log(1/ε) + κ₀) + h(x_i)`.
pub fn diagonal_regularization(spec: &DomainSpec, points: &[Point], mesh: f64) -> Vec<f64> {
    let base = ((1.0 / mesh).ln() + KAPPA0) / PI;
    points.iter().map(|&x| base + spec.harmonic_part(x)).collect()
}

/// A domain sampled on a regular lattice together with its Green kernel.
///
/// Points are the interior lattice vertices at least half a mesh away from
/// the boundary; each represents the square cell of side `mesh` centred on it.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    pub spec: DomainSpec,
    pub n: usize,
    pub points: Vec<Point>,
    pub cell_area: f64,
    pub mesh: f64,
    pub conf_radius: Vec<f64>,
    pub green: Arc<Mat<f64>>,
    // lattice (i, j) -> point index, row-major with stride n + 1
    lattice: Vec<Option<u32>>,
}

impl DomainGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point whose cell contains `x`, if that cell was kept.
    pub fn cell_of(&self, x: Point) -> Option<usize> {
        let (origin, _) = self.spec.bounding_box();
        let i = ((x[0] - origin[0]) / self.mesh).round();
        let j = ((x[1] - origin[1]) / self.mesh).round();
        if i < 0.0 || j < 0.0 || i > self.n as f64 || j > self.n as f64 {
            return None;
        }
        self.lattice[j as usize * (self.n + 1) + i as usize].map(|k| k as usize)
    }

    /// Grid point nearest to `x` (brute force over the point list).
    pub fn nearest_point(&self, x: Point) -> usize {
        if let Some(k) = self.cell_of(x) {
            return k;
        }
        let dist = |p: &Point| (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
        (0..self.points.len())
            .min_by(|&a, &b| dist(&self.points[a]).total_cmp(&dist(&self.points[b])))
            .expect("grid has at least one point")
    }

    pub fn green_entry(&self, i: usize, j: usize) -> f64 {
        self.green[(i, j)]
    }
}

/// Enumerate the lattice and assemble the Green kernel.
pub fn build_grid(spec: DomainSpec, n: usize) -> Result<DomainGrid> {
    spec.validate()?;
    let (origin, side) = spec.bounding_box();
    let mesh = side / n as f64;
    let mut points = Vec::new();
    let mut lattice = vec![None; (n + 1) * (n + 1)];
    for j in 1..n {
        for i in 1..n {
            let x = [origin[0] + i as f64 * mesh, origin[1] + j as f64 * mesh];
            if spec.distance_to_boundary(x) > 0.5 * mesh {
                lattice[j * (n + 1) + i] = Some(points.len() as u32);
                points.push(x);
            }
        }
    }
    if points.is_empty() {
        return Err(LqgError::config(format!("resolution n = {n} leaves no interior grid point")));
    }
    let conf_radius = points
        .iter()
        .map(|&x| conformal_radius(&spec, x))
        .collect::<Result<Vec<_>>>()?;
    let diag = diagonal_regularization(&spec, &points, mesh);
    let green = assemble_green(&spec, &points, &diag)?;
    Ok(DomainGrid {
        spec,
        n,
        points,
        cell_area: mesh * mesh,
        mesh,
        conf_radius,
        green: Arc::new(green),
        lattice,
    })
}

fn assemble_green(spec: &DomainSpec, points: &[Point], diag: &[f64]) -> Result<Mat<f64>> {
    let p = points.len();
    // Columns are independent; fill the upper triangle and mirror it.
    let columns: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut col = Vec::with_capacity(j + 1);
            for i in 0..j {
                col.push(spec.green(points[i], points[j])?);
            }
            col.push(diag[j]);
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(Mat::from_fn(p, p, |i, j| if i <= j { columns[j][i] } else { columns[i][j] }))
}
