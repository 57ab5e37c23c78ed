use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

/// Random stream for one replication: ChaCha8 keyed by `seed`, with the
/// replication index selecting the stream, so results do not depend on which
/// thread runs which replication.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Jump-height distribution of a compound-Poisson basis. Both laws are symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpLaw {
    Normal { std: f64 },
    /// `+value` or `-value` with probability one half each.
    Symmetric { value: f64 },
}

impl JumpLaw {
    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Normal { std } => std * std,
            JumpLaw::Symmetric { value } => value * value,
        }
    }

    pub fn fourth_moment(&self) -> f64 {
        match *self {
            JumpLaw::Normal { std } => 3.0 * std.powi(4),
            JumpLaw::Symmetric { value } => value.powi(4),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Normal { std } => std * rng.sample::<f64, _>(StandardNormal),
            JumpLaw::Symmetric { value } => {
                if rng.random::<bool>() {
                    value
                } else {
                    -value
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyFamily {
    Gaussian { variance: f64 },
    /// Jumps arrive with `intensity` per unit volume; heights follow `jumps`.
    CompoundPoisson { intensity: f64, jumps: JumpLaw },
    /// Symmetric variance-gamma: a Gaussian with gamma-distributed variance.
    /// `variance` is the variance per unit volume, `shape` the variance of the
    /// gamma subordinator per unit volume (larger means heavier tails).
    VarianceGamma { variance: f64, shape: f64 },
}

/// Mean-zero driving noise of a CARMA field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyBasisSpec {
    family: LevyFamily,
}

impl LevyBasisSpec {
    pub fn new(family: LevyFamily) -> Result<Self> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let ok = match family {
            LevyFamily::Gaussian { variance } => positive(variance),
            LevyFamily::CompoundPoisson { intensity, jumps } => {
                positive(intensity) && positive(jumps.second_moment())
            }
            LevyFamily::VarianceGamma { variance, shape } => positive(variance) && positive(shape),
        };
        if !ok {
            return Err(Error::InvalidInput(format!("invalid noise parameters {family:?}")));
        }
        Ok(Self { family })
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(LevyFamily::Gaussian { variance })
    }

    pub fn compound_poisson(intensity: f64, jumps: JumpLaw) -> Result<Self> {
        Self::new(LevyFamily::CompoundPoisson { intensity, jumps })
    }

    /// Variance-gamma basis; unit shape is the default used throughout the crate.
    pub fn variance_gamma(variance: f64, shape: f64) -> Result<Self> {
        Self::new(LevyFamily::VarianceGamma { variance, shape })
    }

    pub fn family(&self) -> LevyFamily {
        self.family
    }

    /// Variance per unit volume.
    pub fn kappa2(&self) -> f64 {
        match self.family {
            LevyFamily::Gaussian { variance } => variance,
            LevyFamily::CompoundPoisson { intensity, jumps } => intensity * jumps.second_moment(),
            LevyFamily::VarianceGamma { variance, .. } => variance,
        }
    }

    /// Fourth-cumulant density per unit volume; zero for the Gaussian basis.
    pub fn fourth_cumulant(&self) -> f64 {
        match self.family {
            LevyFamily::Gaussian { .. } => 0.0,
            LevyFamily::CompoundPoisson { intensity, jumps } => intensity * jumps.fourth_moment(),
            LevyFamily::VarianceGamma { variance, shape } => 3.0 * variance * variance * shape,
        }
    }

    /// The fourth-order quantity with `kappa4 - 3 kappa2^2` equal to the
    /// fourth-cumulant density.
    pub fn kappa4(&self) -> f64 {
        self.fourth_cumulant() + 3.0 * self.kappa2().powi(2)
    }

    /// Short description for provenance records.
    pub fn describe(&self) -> String {
        match self.family {
            LevyFamily::Gaussian { variance } => format!("gaussian(variance={variance})"),
            LevyFamily::CompoundPoisson { intensity, jumps } => {
                let law = match jumps {
                    JumpLaw::Normal { std } => format!("normal(std={std})"),
                    JumpLaw::Symmetric { value } => format!("symmetric(value={value})"),
                };
                format!("compound-poisson(intensity={intensity},jumps={law})")
            }
            LevyFamily::VarianceGamma { variance, shape } => {
                format!("variance-gamma(variance={variance},shape={shape})")
            }
        }
    }

    /// Draws the noise mass of one cell of volume `cell_volume`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, cell_volume: f64, rng: &mut R) -> f64 {
        debug_assert!(cell_volume > 0.0);
        match self.family {
            LevyFamily::Gaussian { variance } => {
                (variance * cell_volume).sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            LevyFamily::CompoundPoisson { intensity, jumps } => {
                let count = poisson_count(intensity * cell_volume, rng);
                // jump laws are symmetric, so no compensator is needed
                (0..count).map(|_| jumps.sample(rng)).sum()
            }
            LevyFamily::VarianceGamma { variance, shape } => {
                let gamma = Gamma::new(cell_volume / shape, shape).expect("validated parameters");
                let g: f64 = gamma.sample(rng);
                (variance * g).sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    /// Fills `out` with independent increments.
    pub fn fill_increments<R: Rng + ?Sized>(&self, cell_volume: f64, out: &mut [f64], rng: &mut R) {
        match self.family {
            LevyFamily::Gaussian { variance } => {
                let scale = (variance * cell_volume).sqrt();
                for v in out.iter_mut() {
                    *v = scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
            LevyFamily::VarianceGamma { variance, shape } => {
                let gamma = Gamma::new(cell_volume / shape, shape).expect("validated parameters");
                for v in out.iter_mut() {
                    let g: f64 = gamma.sample(rng);
                    *v = (variance * g).sqrt() * rng.sample::<f64, _>(StandardNormal);
                }
            }
            LevyFamily::CompoundPoisson { .. } => {
                for v in out.iter_mut() {
                    *v = self.sample_increment(cell_volume, rng);
                }
            }
        }
    }
}

/// Free-function form of [`LevyBasisSpec::sample_increment`].
pub fn sample_increment<R: Rng + ?Sized>(basis: &LevyBasisSpec, cell_volume: f64, rng: &mut R) -> f64 {
    basis.sample_increment(cell_volume, rng)
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}
