//! Command-line front end for the `carma-field` library: grid ingestion and
//! normalization, diagnostics, simulation, variogram fitting, closed-form
//! recovery, model selection and simulation studies.

pub mod app;
pub mod commands;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod io;
pub mod plot;

pub use app::run;
pub use error::{CliError, Result};
