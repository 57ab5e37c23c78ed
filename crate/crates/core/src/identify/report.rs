use std::f64::consts::PI;

use super::moving_average::product_condition;
use crate::error::{Error, Result};
use crate::model::{CarmaSpec, CovarianceModel};

const COEFFICIENT_THRESHOLD: f64 = 1e-10;
const PRODUCT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Identifiable,
    NotIdentifiable,
    /// No identifiability result covers this `(d, p, q)`; flags are still reported.
    UnknownOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    /// Per axis: every axis coefficient `d*` is nonzero.
    pub dstar_nonzero: Vec<bool>,
    /// Per axis: every eigenvalue satisfies `-π/Δ <= Im λ < π/Δ`.
    pub imag_in_band: Vec<bool>,
    /// `λ11 λ12 != λ21 λ22`; only evaluated for planar CARMA(2,1).
    pub product_condition: Option<bool>,
    pub verdict: Verdict,
}

impl IdentifiabilityReport {
    pub fn is_identifiable(&self) -> bool {
        self.verdict == Verdict::Identifiable
    }
}

/// Evaluates the hypotheses under which the axis variogram ordinates
/// `j = 0..=2p+1` determine the parameters.
///
/// Coefficients count as zero below `1e-10` times the variogram sill `2 γ(0)`.
pub fn check_identifiability(spec: &CarmaSpec, delta: &[f64]) -> Result<IdentifiabilityReport> {
    if delta.len() != spec.d() || delta.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::InvalidInput("one positive spacing per axis required".into()));
    }
    let model = CovarianceModel::new(spec)?;
    let sill = 2.0 * model.variance();
    let dstar_nonzero = (0..spec.d())
        .map(|axis| {
            model
                .axis_coefficients(axis)
                .iter()
                .all(|(_, c)| (2.0 * spec.kappa2() * c).norm() > COEFFICIENT_THRESHOLD * sill)
        })
        .collect::<Vec<_>>();
    let imag_in_band = spec
        .eigenvalues()
        .iter()
        .zip(delta)
        .map(|(eigs, &dx)| {
            let band = PI / dx;
            eigs.iter().all(|l| -band <= l.im && l.im < band)
        })
        .collect::<Vec<_>>();
    let (d, p, q) = (spec.d(), spec.p(), spec.q());
    let product = (d == 2 && p == 2 && q == 1).then(|| product_condition(spec.eigenvalues(), PRODUCT_THRESHOLD));
    let covered = q == 0 || (d == 2 && q == 1 && (p == 2 || p == 3));
    let flags_pass = dstar_nonzero.iter().all(|&x| x) && imag_in_band.iter().all(|&x| x) && product.unwrap_or(true);
    let verdict = if !covered {
        Verdict::UnknownOrder
    } else if flags_pass {
        Verdict::Identifiable
    } else {
        Verdict::NotIdentifiable
    };
    Ok(IdentifiabilityReport {
        dstar_nonzero,
        imag_in_band,
        product_condition: product,
        verdict,
    })
}
