use std::fmt;

/// Non-fatal findings attached to results. None of these abort a run; the
/// command line turns them into exit status 4 under `--strict`.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// The scaled heat trace has no interior stationary point on the grid.
    NoPlateau,
    /// Some residuals in a log-log fit were not positive and were skipped.
    NonpositiveResiduals { skipped: usize },
    /// The atom list does not reach far enough for the Laplace transform.
    NonconvergentTail { last_weight: f64 },
    /// Monte Carlo error too large to resolve the requested gap.
    Inconclusive { rel_se: f64 },
    /// Autocorrelation bins with too few pairs were dropped.
    DroppedBins { count: usize },
    /// The empirical autocorrelation never crosses zero.
    NoZeroCrossing,
    /// Eigenvalues in the roundoff band around zero were excluded.
    ClampedEigenvalues { count: usize },
    /// A requested point was snapped to the nearest grid point.
    Snapped { offset: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoPlateau => write!(f, "no plateau at this resolution"),
            Diagnostic::NonpositiveResiduals { skipped } => {
                write!(f, "{skipped} nonpositive residuals skipped in fit")
            }
            Diagnostic::NonconvergentTail { last_weight } => {
                write!(f, "nonconvergent tail (last discounted atom weight {last_weight:e})")
            }
            Diagnostic::Inconclusive { rel_se } => {
                write!(f, "inconclusive: relative standard error {rel_se:.3}")
            }
            Diagnostic::DroppedBins { count } => write!(f, "{count} sparse bins dropped"),
            Diagnostic::NoZeroCrossing => write!(f, "autocorrelation has no zero crossing"),
            Diagnostic::ClampedEigenvalues { count } => {
                write!(f, "{count} roundoff-level eigenvalues excluded")
            }
            Diagnostic::Snapped { offset } => write!(f, "start snapped to grid (offset {offset:.3e})"),
        }
    }
}

impl Diagnostic {
    /// Whether the finding should fail a `--strict` run.
    pub fn is_inconclusive(&self) -> bool {
        !matches!(self, Diagnostic::Snapped { .. } | Diagnostic::ClampedEigenvalues { .. })
    }
}
