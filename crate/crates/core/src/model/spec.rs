use num_complex::Complex64;

use crate::error::{Error, Result};

/// Numerical thresholds shared by the model routines.
///
/// The defaults are the documented library constants; a caller that needs a
/// different trade-off builds a spec with [`CarmaSpec::with_tolerances`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest imaginary residue accepted when a complex eigen-sum is reported as real.
    pub imag_residue: f64,
    /// Imaginary parts of expanded polynomial coefficients below this are discarded.
    pub poly_imag: f64,
    /// Smallest admissible distance between two eigenvalues of the same axis.
    pub min_eigen_gap: f64,
    /// Ceiling on the condition estimate of the per-axis Vandermonde matrices.
    pub max_vandermonde_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            imag_residue: 1e-9,
            poly_imag: 1e-10,
            min_eigen_gap: 1e-6,
            max_vandermonde_condition: 1e12,
        }
    }
}

/// Full parameterization of a causal CARMA(p,q) random field on R^d.
///
/// The moving-average vector is stored padded to length `p`; the autoregressive
/// part is given through the eigenvalues of the `d` companion matrices.
/// Axes are indexed from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CarmaSpec {
    d: usize,
    p: usize,
    q: usize,
    b: Vec<f64>,
    eigenvalues: Vec<Vec<Complex64>>,
    kappa2: f64,
    tolerances: Tolerances,
}

impl CarmaSpec {
    /// Builds and validates a spec. `b` holds `(b_0, ..., b_q)`, so `q = b.len() - 1`.
    pub fn new(b: Vec<f64>, eigenvalues: Vec<Vec<Complex64>>, kappa2: f64) -> Result<Self> {
        Self::with_tolerances(b, eigenvalues, kappa2, Tolerances::default())
    }

    /// Convenience constructor for specs whose eigenvalues are all real.
    pub fn real(b: &[f64], eigenvalues: &[&[f64]], kappa2: f64) -> Result<Self> {
        let eigs = eigenvalues
            .iter()
            .map(|axis| axis.iter().map(|&re| Complex64::new(re, 0.0)).collect())
            .collect();
        Self::new(b.to_vec(), eigs, kappa2)
    }

    pub fn with_tolerances(
        b: Vec<f64>,
        mut eigenvalues: Vec<Vec<Complex64>>,
        kappa2: f64,
        tolerances: Tolerances,
    ) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        let p = eigenvalues[0].len();
        if p == 0 {
            return Err(Error::InvalidSpec("autoregressive order must be positive".into()));
        }
        if let Some(axis) = eigenvalues.iter().position(|e| e.len() != p) {
            return Err(Error::InvalidSpec(format!(
                "axis {axis} has {} eigenvalues, expected {p}",
                eigenvalues[axis].len()
            )));
        }
        if b.is_empty() || b.len() > p {
            return Err(Error::InvalidSpec(format!(
                "moving-average vector must have between 1 and {p} entries, got {}",
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("moving-average coefficients must be finite".into()));
        }
        let q = b.len() - 1;
        if b[q] == 0.0 {
            return Err(Error::InvalidSpec(format!("b_{q} must be nonzero")));
        }
        if !(kappa2.is_finite() && kappa2 > 0.0) {
            return Err(Error::InvalidSpec(format!("kappa2 must be positive, got {kappa2}")));
        }

        for (axis, eigs) in eigenvalues.iter_mut().enumerate() {
            for lambda in eigs.iter_mut() {
                if !(lambda.re.is_finite() && lambda.im.is_finite()) {
                    return Err(Error::InvalidSpec(format!("non-finite eigenvalue on axis {axis}")));
                }
                if lambda.re >= 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "eigenvalue {lambda} on axis {axis} must have negative real part"
                    )));
                }
                if lambda.im.abs() <= tolerances.poly_imag * lambda.norm().max(1.0) {
                    lambda.im = 0.0;
                }
            }
            check_distinct(eigs, axis, tolerances.min_eigen_gap)?;
            check_conjugate_closed(eigs, axis, tolerances.poly_imag)?;
        }

        let mut padded = b;
        padded.resize(p, 0.0);
        Ok(Self {
            d,
            p,
            q,
            b: padded,
            eigenvalues,
            kappa2,
            tolerances,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Moving-average vector padded to length `p`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn eigenvalues(&self) -> &[Vec<Complex64>] {
        &self.eigenvalues
    }

    pub fn axis_eigenvalues(&self, axis: usize) -> &[Complex64] {
        &self.eigenvalues[axis]
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    /// Number of free parameters `q + 1 + d p`.
    pub fn parameter_count(&self) -> usize {
        self.q + 1 + self.d * self.p
    }

    /// Largest real part over all eigenvalues (always negative).
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues
            .iter()
            .flatten()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_kappa2(&self, kappa2: f64) -> Result<Self> {
        Self::with_tolerances(
            self.b[..=self.q].to_vec(),
            self.eigenvalues.clone(),
            kappa2,
            self.tolerances,
        )
    }

    pub fn with_b(&self, b: Vec<f64>) -> Result<Self> {
        Self::with_tolerances(b, self.eigenvalues.clone(), self.kappa2, self.tolerances)
    }
}

pub(crate) fn check_distinct(eigs: &[Complex64], axis: usize, gap_tol: f64) -> Result<()> {
    for i in 0..eigs.len() {
        for j in (i + 1)..eigs.len() {
            let gap = (eigs[i] - eigs[j]).norm();
            if gap < gap_tol {
                return Err(Error::DuplicateEigenvalue {
                    axis,
                    first: i,
                    second: j,
                    gap,
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_conjugate_closed(eigs: &[Complex64], axis: usize, tol: f64) -> Result<()> {
    for lambda in eigs {
        if lambda.im == 0.0 {
            continue;
        }
        let partner = eigs
            .iter()
            .any(|other| (other - lambda.conj()).norm() <= tol * lambda.norm().max(1.0));
        if !partner {
            return Err(Error::NonConjugateSet { axis });
        }
    }
    Ok(())
}
