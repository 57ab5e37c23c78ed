//! Closed-form second-order theory: kernel, autocovariance, variogram and
//! spectral density of a causal CARMA random field.

mod companion;
mod covariance;
mod kernel;
mod spec;
mod spectral;

pub use companion::{companion_from_eigenvalues, CompanionMatrix};
pub use covariance::{autocovariance, axis_variogram_coefficients, variogram, CovarianceModel};
pub use kernel::{kernel_coefficients, kernel_eval, Kernel, KernelCoefficients, KernelEvaluator};
pub use spec::{CarmaSpec, Tolerances};
pub use spectral::spectral_density;
