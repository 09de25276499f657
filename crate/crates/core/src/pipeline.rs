//! One replica of the full pipeline: field, chaos, operator, spectrum.

use std::sync::Arc;

use crate::domain::{build_grid, DomainGrid, DomainSpec};
use crate::error::Result;
use crate::field::{build_covariance, gmc_from_values, sample_gff, CouplingParams, CovarianceModel, GmcMeasure};
use crate::spectral::{assemble_operator, eigendecompose, eigenvalues_only, LiouvilleOperator, LiouvilleSpectrum};

/// Per-stage seed offsets added to the base seed.
pub mod seed_offset {
    pub const FIELD: u64 = 0;
    pub const LBM: u64 = 1_000_003;
    pub const BRIDGE: u64 = 2_000_003;
    pub const DIAG_POINT: u64 = 3_000_017;
    pub const BERRY_CENTER: u64 = 4_000_037;
}

/// Seed of a stage for replica `r`.
pub fn stage_seed(base: u64, offset: u64, replica: usize) -> u64 {
    base.wrapping_add(offset).wrapping_add(replica as u64)
}

/// Grid and field covariance shared by all replicas at one resolution.
#[derive(Debug, Clone)]
pub struct Lab {
    pub grid: Arc<DomainGrid>,
    pub model: Arc<CovarianceModel>,
}

#[derive(Debug, Clone)]
pub struct Replica {
    pub seed: u64,
    pub params: CouplingParams,
    pub field: Vec<f64>,
    pub measure: GmcMeasure,
    pub operator: LiouvilleOperator,
    pub spectrum: LiouvilleSpectrum,
}

impl Lab {
    pub fn new(spec: DomainSpec, n: usize) -> Result<Self> {
        let grid = Arc::new(build_grid(spec, n).map_err(|e| e.in_stage("grid"))?);
        let model = Arc::new(build_covariance(Arc::clone(&grid)).map_err(|e| e.in_stage("covariance"))?);
        Ok(Lab { grid, model })
    }

    /// Samples a field with `seed` and diagonalises the resulting operator.
    pub fn replica(&self, params: CouplingParams, seed: u64, vectors: bool) -> Result<Replica> {
        let field = sample_gff(&self.model, seed).values;
        self.replica_from_field(params, seed, field, vectors)
    }

    /// Runs the pipeline on a given field, e.g. one loaded from a snapshot.
    pub fn replica_from_field(
        &self,
        params: CouplingParams,
        seed: u64,
        field: Vec<f64>,
        vectors: bool,
    ) -> Result<Replica> {
        let measure = gmc_from_values(&field, self.grid.cell_area, self.grid.mesh, params.gamma);
        let operator = assemble_operator(&self.grid, &measure).map_err(|e| e.in_stage("assemble"))?;
        let spectrum = if vectors { eigendecompose(&operator) } else { eigenvalues_only(&operator) }
            .map_err(|e| e.in_stage("eigendecompose"))?;
        Ok(Replica { seed, params, field, measure, operator, spectrum })
    }
}
