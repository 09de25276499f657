//! Numerical laboratory for the spectrum of Liouville quantum gravity on
//! planar domains.
//!
//! The pipeline is: discretise a domain and its Dirichlet Green function
//! ([`domain`]), sample a Gaussian free field and its lattice multiplicative
//! chaos ([`field`]), assemble and diagonalise the Liouville Green operator
//! ([`spectral`]), then study heat traces ([`heat`]), Liouville Brownian
//! motion ([`lbm`]) and quantum-chaos statistics ([`chaos`]). The [`cli`]
//! module drives complete experiments and persists their outputs.

pub mod chaos;
pub mod cli;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod field;
pub mod heat;
pub mod lbm;
pub mod pipeline;
pub mod spectral;
pub mod stats;

pub use diagnostics::Diagnostic;
pub use domain::{DomainGrid, DomainKind, DomainSpec, Point};
pub use error::{LqgError, Result};
pub use field::{CouplingParams, CovarianceModel, FieldSample, GmcMeasure};
pub use spectral::{LiouvilleOperator, LiouvilleSpectrum, WeylFit};

/// Version string recorded in every run record.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
