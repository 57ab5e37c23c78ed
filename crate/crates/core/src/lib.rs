//! Simulation, estimation and identification of Lévy-driven causal CARMA
//! random fields on regular lattices.

pub mod error;
pub mod estimate;
pub mod field;
pub mod identify;
pub mod model;
mod quadrature;
pub mod simulate;
pub mod study;

pub use error::{Error, Result};
pub use field::LatticeField;
pub use model::{CarmaSpec, CovarianceModel, Kernel};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
