use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("eigenvalues on axis {axis} are not closed under complex conjugation")]
    NonConjugateSet { axis: usize },

    #[error("eigenvalues {first} and {second} on axis {axis} coincide (gap {gap:.3e})")]
    DuplicateEigenvalue {
        axis: usize,
        first: usize,
        second: usize,
        gap: f64,
    },

    #[error("Vandermonde matrix of axis {axis} is ill-conditioned (condition {condition:.3e})")]
    IllConditionedVandermonde { axis: usize, condition: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lattice point {point:?} lies outside the truncation box [-{radius}, {radius}]^d")]
    GridOutsideTruncation { point: Vec<f64>, radius: f64 },

    #[error("kernel array needs {required} cells, budget is {budget}")]
    KernelArrayOverflow { required: usize, budget: usize },

    #[error("lag {lag:?} out of range for grid with {n:?} points per axis")]
    LagOutOfRange { lag: Vec<i64>, n: Vec<usize> },

    #[error("lag set cannot identify a CARMA({p},{q}) model: axis {axis} needs lags j=1..={required}")]
    NonIdentifiableLagSet {
        p: usize,
        q: usize,
        axis: usize,
        required: usize,
    },

    #[error("design matrix is singular (condition {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("fits were computed on different lag sets")]
    MixedLagSets,

    #[error("Hankel system is singular (condition {condition:.3e})")]
    SingularHankel { condition: f64 },

    #[error("recovered eigenvalue {re}{im:+}i lies outside the aliasing band")]
    RootOutsideBand { re: f64, im: f64 },

    #[error("recovered root with modulus {modulus} is not stable")]
    UnstableRoot { modulus: f64 },

    #[error("negative variance estimate {0}")]
    NegativeVarianceEstimate(f64),

    #[error("identifiability condition violated: {0}")]
    ConditionViolated(String),

    #[error("monomial system is inconsistent (relative mismatch {0:.3e})")]
    InconsistentMonomials(f64),

    #[error("monomial system is rank deficient (numerical rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at position {0}")]
    NonFiniteValue(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
