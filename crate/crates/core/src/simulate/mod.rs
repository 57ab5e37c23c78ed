//! Lattice realizations of CARMA fields and the error of the two simulation
//! schemes.

mod compound_poisson;
mod discretized;
mod levy;
pub(crate) mod mse;

pub use compound_poisson::{
    evaluate_jump_field, sample_jumps, simulate_compound_poisson, simulate_compound_poisson_at,
    JumpSet, LatticeGrid, JUMP_CUTOFF,
};
pub use discretized::{simulate_truncated_discretized, DiscretizedSimulator, DEFAULT_KERNEL_BUDGET};
pub use levy::{replication_rng, sample_increment, JumpLaw, LevyBasisSpec, LevyFamily};
pub use mse::{
    mse_discretization, mse_discretization_floor, mse_discretization_with, mse_truncation_cp, MseMethod,
};
