use nalgebra::DMatrix;
use num_complex::Complex64;

use super::spec::{check_conjugate_closed, check_distinct};
use crate::error::{Error, Result};

/// Real companion matrix of the monic polynomial
/// `z^p + a_1 z^{p-1} + ... + a_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    coeffs: Vec<f64>,
}

impl CompanionMatrix {
    /// Coefficients `a_1, ..., a_p`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Ones on the superdiagonal, `(-a_p, ..., -a_1)` in the last row.
    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.order();
        let mut m = DMatrix::zeros(p, p);
        for r in 0..p.saturating_sub(1) {
            m[(r, r + 1)] = 1.0;
        }
        for c in 0..p {
            m[(p - 1, c)] = -self.coeffs[p - 1 - c];
        }
        m
    }

    /// Evaluates the characteristic polynomial at `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &a| acc * z + a)
    }

    /// Derivative of the characteristic polynomial at `z`.
    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let p = self.order();
        let mut acc = Complex64::new(p as f64, 0.0);
        for (j, &a) in self.coeffs.iter().enumerate().take(p.saturating_sub(1)) {
            acc = acc * z + a * (p - 1 - j) as f64;
        }
        acc
    }
}

/// Expands `prod (z - lambda_k)` into a real monic polynomial.
pub fn companion_from_eigenvalues(eigs: &[Complex64]) -> Result<CompanionMatrix> {
    companion_for_axis(eigs, 0, 1e-12, 1e-10)
}

pub(crate) fn companion_for_axis(
    eigs: &[Complex64],
    axis: usize,
    gap_tol: f64,
    imag_tol: f64,
) -> Result<CompanionMatrix> {
    if eigs.is_empty() {
        return Err(Error::InvalidInput("empty eigenvalue list".into()));
    }
    check_distinct(eigs, axis, gap_tol)?;
    check_conjugate_closed(eigs, axis, imag_tol)?;
    let poly = monic_from_roots(eigs);
    let coeffs = poly[1..]
        .iter()
        .map(|c| {
            if c.im.abs() > imag_tol * c.re.abs().max(1.0) {
                Err(Error::NonConjugateSet { axis })
            } else {
                Ok(c.re)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompanionMatrix { coeffs })
}

/// Coefficients of `prod (z - r)`, leading coefficient first.
pub(crate) fn monic_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        poly.push(Complex64::new(0.0, 0.0));
        for j in (1..poly.len()).rev() {
            let prev = poly[j - 1];
            poly[j] -= r * prev;
        }
    }
    poly
}
