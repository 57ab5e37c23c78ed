//! Closed-form recovery of CARMA parameters from exact variogram ordinates on
//! the principal axes, and checks of the conditions under which it is unique.

mod axis;
mod moving_average;
mod report;

use num_complex::Complex64;

pub use axis::{
    axis_ordinates, hankel_condition, recover_axis_coefficients, recover_axis_eigenvalues, AxisOrdinates,
};
pub use moving_average::{
    monomial_coefficients, monomial_pairs, recover_b_car, recover_b_carma21, recover_b_carma31, recover_monomials,
};
pub use report::{check_identifiability, IdentifiabilityReport, Verdict};

use crate::error::{Error, Result};
use crate::model::CarmaSpec;

/// Everything recovered from one set of axis ordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub spec: CarmaSpec,
    /// Axis coefficients `d*`, aligned with `spec.eigenvalues()`.
    pub dstar: Vec<Vec<Complex64>>,
    /// Condition number of each axis's Hankel system.
    pub hankel_conditions: Vec<f64>,
}

/// Recovers a CARMA(p,q) spec from ordinates `j = 0..=2p+1` on every axis.
/// Supported orders are CAR(p) in any dimension and planar CARMA(2,1) and
/// CARMA(3,1).
pub fn recover(ords: &[AxisOrdinates], p: usize, q: usize, kappa2: f64) -> Result<Recovery> {
    let d = ords.len();
    if d == 0 {
        return Err(Error::InvalidInput("no ordinates given".into()));
    }
    for (i, ord) in ords.iter().enumerate() {
        if ord.axis() != i {
            return Err(Error::InvalidInput(format!("ordinates for axis {i} expected in position {i}")));
        }
    }
    if !(q == 0 || (d == 2 && q == 1 && (p == 2 || p == 3))) {
        return Err(Error::InvalidInput(format!(
            "no closed-form recovery for CARMA({p},{q}) in dimension {d}"
        )));
    }
    let mut eigs = Vec::with_capacity(d);
    let mut hankel_conditions = Vec::with_capacity(d);
    let mut dstar = Vec::with_capacity(d);
    for ord in ords {
        hankel_conditions.push(hankel_condition(ord, p)?);
        let e = recover_axis_eigenvalues(ord, p)?;
        dstar.push(recover_axis_coefficients(ord, &e)?);
        eigs.push(e);
    }
    let b = if q == 0 {
        vec![recover_b_car(ords, &eigs, kappa2)?]
    } else {
        let (b0, b1) = if p == 2 {
            recover_b_carma21(&dstar, &eigs, kappa2)?
        } else {
            recover_b_carma31(&dstar, &eigs, kappa2)?
        };
        vec![b0, b1]
    };
    Ok(Recovery {
        spec: CarmaSpec::new(b, eigs, kappa2)?,
        dstar,
        hankel_conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_round_trip_carma21() {
        let spec = CarmaSpec::real(&[4.8940, -1.1432], &[&[-1.7776, -2.0948], &[-1.3057, -2.5142]], 1.0).unwrap();
        let ords = axis_ordinates(&spec, &[0.04, 0.04], 5).unwrap();
        let rec = recover(&ords, 2, 1, 1.0).unwrap();
        for (a, b) in rec.spec.b().iter().zip(spec.b()) {
            assert!((a - b).abs() < 1e-7, "{:?}", rec.spec);
        }
        for (ea, eb) in rec.spec.eigenvalues().iter().zip(spec.eigenvalues()) {
            for (a, b) in ea.iter().zip(eb) {
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn full_round_trip_car2_planar() {
        let spec = CarmaSpec::real(&[1.5], &[&[-0.7, -1.9], &[-1.1, -2.6]], 0.7).unwrap();
        let ords = axis_ordinates(&spec, &[0.2, 0.3], 5).unwrap();
        let rec = recover(&ords, 2, 0, 0.7).unwrap();
        assert!((rec.spec.b()[0] - 1.5).abs() < 1e-8);
    }

    #[test]
    fn unsupported_order_rejected() {
        let spec = CarmaSpec::real(&[1.0, 0.5, 0.2], &[&[-1.0, -2.0, -3.0], &[-1.5, -2.5, -3.5]], 1.0).unwrap();
        let ords = axis_ordinates(&spec, &[0.2, 0.2], 7).unwrap();
        assert!(recover(&ords, 3, 2, 1.0).is_err());
    }
}
