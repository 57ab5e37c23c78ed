use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::axis::{recover_axis_coefficients, AxisOrdinates};
use crate::error::{Error, Result};
use crate::model::{CarmaSpec, CovarianceModel};

const RANK_TOLERANCE: f64 = 1e-10;
/// Relative mismatch allowed in `b0² b1² = (b0 b1)²`; exact ordinates leave
/// up to about 1e-6 after an order-three Hankel solve.
const CONSISTENCY_TOLERANCE: f64 = 1e-5;
const PRODUCT_TOLERANCE: f64 = 1e-8;

/// Index pairs `(i, j)`, `i <= j`, of the monomials `b_i b_j` in the order
/// `(0,0), (0,1), ..., (0,q), (1,1), ...`.
pub fn monomial_pairs(q: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..=q {
        for j in i..=q {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Coefficients of every axis coefficient `d*` as a linear form in the
/// monomials `b_i b_j`: entry `[axis][k][m]` multiplies monomial `m` in
/// `d*(λ_{axis,k})`.
///
/// `d*` is a quadratic form in `b` whose matrix depends only on the
/// eigenvalues, so the linear forms are read off from evaluations at fixed
/// moving-average vectors.
pub fn monomial_coefficients(eigs: &[Vec<Complex64>], q: usize, kappa2: f64) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let pairs = monomial_pairs(q);
    let m = pairs.len();
    let samples = m + 3;
    let probes: Vec<Vec<f64>> = (0..samples)
        .map(|s| {
            (0..=q)
                .map(|i| {
                    let phase = ((s * (2 * i + 3) + i * 5) % 11) as f64;
                    if i == q {
                        0.5 + phase / 10.0
                    } else {
                        phase / 5.0 - 1.0
                    }
                })
                .collect()
        })
        .collect();
    let design = DMatrix::from_fn(samples, m, |s, k| probes[s][pairs[k].0] * probes[s][pairs[k].1]);
    let pinv = design
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let d = eigs.len();
    let mut values: Vec<Vec<Vec<Complex64>>> = eigs.iter().map(|e| vec![Vec::with_capacity(samples); e.len()]).collect();
    for probe in &probes {
        let spec = CarmaSpec::new(probe.clone(), eigs.to_vec(), kappa2)?;
        let model = CovarianceModel::new(&spec)?;
        for axis in 0..d {
            for (k, (_, c)) in model.axis_coefficients(axis).into_iter().enumerate() {
                values[axis][k].push(2.0 * kappa2 * c);
            }
        }
    }
    Ok(values
        .into_iter()
        .map(|axis| {
            axis.into_iter()
                .map(|v| {
                    (0..m)
                        .map(|k| (0..samples).map(|s| v[s] * pinv[(k, s)]).sum())
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Least-squares monomials `b_i b_j` from the axis coefficients, with the
/// numerical rank of the system checked first.
pub fn recover_monomials(dstar: &[Vec<Complex64>], eigs: &[Vec<Complex64>], q: usize, kappa2: f64) -> Result<Vec<f64>> {
    check_shapes(dstar, eigs)?;
    let coefficients = monomial_coefficients(eigs, q, kappa2)?;
    let m = monomial_pairs(q).len();
    let mut rows: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
    for (axis, coef) in coefficients.iter().enumerate() {
        for (k, c) in coef.iter().enumerate() {
            rows.push((c.clone(), dstar[axis][k]));
        }
    }
    // real and imaginary parts as separate equations; row scaling by the
    // largest coefficient keeps every equation on a common footing
    let mut a = Vec::new();
    let mut rhs = Vec::new();
    for (c, v) in &rows {
        let scale = c.iter().fold(0.0f64, |s, z| s.max(z.norm()));
        if scale == 0.0 {
            continue;
        }
        a.push(c.iter().map(|z| z.re / scale).collect::<Vec<_>>());
        rhs.push(v.re / scale);
        if c.iter().any(|z| z.im != 0.0) || v.im != 0.0 {
            a.push(c.iter().map(|z| z.im / scale).collect());
            rhs.push(v.im / scale);
        }
    }
    let design = DMatrix::from_fn(a.len(), m, |r, k| a[r][k]);
    let svd = design.svd(true, true);
    let rank = svd.rank(RANK_TOLERANCE * svd.singular_values.max());
    if rank < m {
        return Err(Error::RankDeficient { rank, needed: m });
    }
    let x = svd
        .solve(&DVector::from_vec(rhs), 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

fn check_shapes(dstar: &[Vec<Complex64>], eigs: &[Vec<Complex64>]) -> Result<()> {
    if dstar.len() != eigs.len() || dstar.iter().zip(eigs).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::InvalidInput("one coefficient per eigenvalue required".into()));
    }
    Ok(())
}

/// `b_0 >= 0` and `b_1` from the monomials `(b0², b0 b1, b1²)`.
fn extract_order_one(x: &[f64]) -> Result<(f64, f64)> {
    let (b00, b01, b11) = (x[0], x[1], x[2]);
    let scale = b00.abs().max(b01.abs()).max(b11.abs());
    if b00 < -CONSISTENCY_TOLERANCE * scale {
        return Err(Error::NegativeVarianceEstimate(b00));
    }
    if b11 <= 0.0 {
        return Err(Error::NegativeVarianceEstimate(b11));
    }
    let b0 = b00.max(0.0).sqrt();
    if b0 <= CONSISTENCY_TOLERANCE * scale.sqrt() {
        return Ok((0.0, b11.sqrt()));
    }
    let b1 = b01 / b0;
    let mismatch = (b1 * b1 - b11).abs() / b11.abs();
    if mismatch > CONSISTENCY_TOLERANCE {
        return Err(Error::InconsistentMonomials(mismatch));
    }
    Ok((b0, b1))
}

/// `b_0` of a CAR(p) field: the recovered variance divided by the variance of
/// the same autoregressive part with `b_0 = 1`.
pub fn recover_b_car(ords: &[AxisOrdinates], eigs: &[Vec<Complex64>], kappa2: f64) -> Result<f64> {
    if ords.len() != eigs.len() || ords.is_empty() {
        return Err(Error::InvalidInput("one ordinate set per axis required".into()));
    }
    let mut limit = 0.0;
    for (ord, e) in ords.iter().zip(eigs) {
        let dstar = recover_axis_coefficients(ord, e)?;
        limit += dstar.iter().sum::<Complex64>().re;
    }
    let variance = 0.5 * limit / ords.len() as f64;
    let unit = CovarianceModel::new(&CarmaSpec::new(vec![1.0], eigs.to_vec(), kappa2)?)?.variance();
    let ratio = variance / unit;
    if !(ratio > 0.0) {
        return Err(Error::NegativeVarianceEstimate(ratio));
    }
    Ok(ratio.sqrt())
}

/// `λ11 λ12 != λ21 λ22` up to a relative tolerance.
pub fn product_condition(eigs: &[Vec<Complex64>], tolerance: f64) -> bool {
    let a: Complex64 = eigs[0].iter().product();
    let b: Complex64 = eigs[1].iter().product();
    (a - b).norm() > tolerance * a.norm().max(b.norm())
}

/// `(b_0, b_1)` of a planar CARMA(2,1) field from its four axis coefficients.
pub fn recover_b_carma21(dstar: &[Vec<Complex64>], eigs: &[Vec<Complex64>], kappa2: f64) -> Result<(f64, f64)> {
    if eigs.len() != 2 || eigs.iter().any(|e| e.len() != 2) {
        return Err(Error::InvalidInput("CARMA(2,1) recovery needs two axes of order two".into()));
    }
    if !product_condition(eigs, PRODUCT_TOLERANCE) {
        let a: Complex64 = eigs[0].iter().product();
        let b: Complex64 = eigs[1].iter().product();
        return Err(Error::ConditionViolated(format!(
            "eigenvalue products {a} and {b} coincide; b is not determined by the axis variograms"
        )));
    }
    extract_order_one(&recover_monomials(dstar, eigs, 1, kappa2)?)
}

/// `(b_0, b_1)` of a planar CARMA(3,1) field from its six axis coefficients.
pub fn recover_b_carma31(dstar: &[Vec<Complex64>], eigs: &[Vec<Complex64>], kappa2: f64) -> Result<(f64, f64)> {
    if eigs.len() != 2 || eigs.iter().any(|e| e.len() != 3) {
        return Err(Error::InvalidInput("CARMA(3,1) recovery needs two axes of order three".into()));
    }
    extract_order_one(&recover_monomials(dstar, eigs, 1, kappa2)?)
}
