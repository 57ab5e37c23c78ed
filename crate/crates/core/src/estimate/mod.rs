//! Weighted least-squares estimation from empirical variograms, the
//! estimator's asymptotic covariance and AIC model selection.

mod asymptotic;
mod fit;
mod optimize;
mod params;
mod select;
mod variogram;
mod weights;

pub use asymptotic::{asymptotic_covariance, variogram_jacobian};
pub use fit::{aic, check_lag_set, fit, wls_objective, MIN_RELATIVE_GAP, FitConfig, FitDiagnostics, FitResult, WlsProblem};
pub use optimize::{differential_evolution, nelder_mead, Bounds, DeConfig, DeResult, NmConfig, NmResult};
pub use params::{canonical_order, canonicalize_spec, ModelStructure};
pub use select::model_select;
pub use variogram::{axis_lags, empirical_variogram, EmpiricalVariogram};
pub use weights::{weights_exponential, weights_quadratic, WeightScheme};

pub use asymptotic::LatticeSums;
