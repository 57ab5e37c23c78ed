use num_complex::Complex64;

use super::optimize::Bounds;
use crate::error::{Error, Result};
use crate::model::CarmaSpec;

/// Shape of a fitted model and the layout of its real parameter vector.
///
/// The parameter vector is `(b_0, ..., b_q)` followed, axis by axis, by
/// `(re, im)` for each complex-conjugate pair (only the representative with
/// positive imaginary part is stored) and then the real eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStructure {
    pub d: usize,
    pub p: usize,
    pub q: usize,
    /// Variance of the driving noise; held fixed during fitting.
    pub kappa2: f64,
    /// Number of complex-conjugate eigenvalue pairs on each axis.
    pub complex_pairs: Vec<usize>,
}

impl ModelStructure {
    /// Structure with only real eigenvalues.
    pub fn new(d: usize, p: usize, q: usize, kappa2: f64) -> Result<Self> {
        Self::with_complex_pairs(d, p, q, kappa2, vec![0; d])
    }

    pub fn with_complex_pairs(d: usize, p: usize, q: usize, kappa2: f64, complex_pairs: Vec<usize>) -> Result<Self> {
        if d == 0 || p == 0 || q >= p {
            return Err(Error::InvalidInput(format!("invalid model order d={d}, p={p}, q={q}")));
        }
        if !(kappa2.is_finite() && kappa2 > 0.0) {
            return Err(Error::InvalidInput("kappa2 must be positive".into()));
        }
        if complex_pairs.len() != d || complex_pairs.iter().any(|&c| 2 * c > p) {
            return Err(Error::InvalidInput("invalid complex pair counts".into()));
        }
        Ok(Self {
            d,
            p,
            q,
            kappa2,
            complex_pairs,
        })
    }

    pub fn from_spec(spec: &CarmaSpec) -> Self {
        Self {
            d: spec.d(),
            p: spec.p(),
            q: spec.q(),
            kappa2: spec.kappa2(),
            complex_pairs: spec
                .eigenvalues()
                .iter()
                .map(|eigs| eigs.iter().filter(|l| l.im > 0.0).count())
                .collect(),
        }
    }

    /// `q + 1 + d p`.
    pub fn parameter_count(&self) -> usize {
        self.q + 1 + self.d * self.p
    }

    /// Conventional model name such as `CAR(1)` or `CARMA(2,1)`.
    pub fn label(&self) -> String {
        if self.q == 0 {
            format!("CAR({})", self.p)
        } else {
            format!("CARMA({},{})", self.p, self.q)
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..=self.q).map(|i| format!("b{i}")).collect();
        for axis in 0..self.d {
            let mut k = 1;
            for _ in 0..self.complex_pairs[axis] {
                names.push(format!("re_lambda{}{}", axis + 1, k));
                names.push(format!("im_lambda{}{}", axis + 1, k));
                k += 2;
            }
            while k <= self.p {
                names.push(format!("lambda{}{}", axis + 1, k));
                k += 1;
            }
        }
        names
    }

    /// Builds the spec encoded by `theta`, eigenvalues in canonical order.
    pub fn to_spec(&self, theta: &[f64]) -> Result<CarmaSpec> {
        if theta.len() != self.parameter_count() {
            return Err(Error::InvalidInput(format!(
                "parameter vector has {} entries, expected {}",
                theta.len(),
                self.parameter_count()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        let b = theta[..=self.q].to_vec();
        let mut pos = self.q + 1;
        let mut eigenvalues = Vec::with_capacity(self.d);
        for axis in 0..self.d {
            let mut eigs = Vec::with_capacity(self.p);
            for _ in 0..self.complex_pairs[axis] {
                let (re, im) = (theta[pos], theta[pos + 1]);
                if !(im > 0.0) {
                    return Err(Error::InvalidInput("complex pair needs a positive imaginary part".into()));
                }
                eigs.push(Complex64::new(re, im));
                eigs.push(Complex64::new(re, -im));
                pos += 2;
            }
            while eigs.len() < self.p {
                eigs.push(Complex64::new(theta[pos], 0.0));
                pos += 1;
            }
            canonical_order(&mut eigs);
            eigenvalues.push(eigs);
        }
        CarmaSpec::new(b, eigenvalues, self.kappa2)
    }

    /// Parameter vector of `spec`, which must share this structure.
    pub fn theta_of(&self, spec: &CarmaSpec) -> Result<Vec<f64>> {
        if ModelStructure::from_spec(spec) != *self {
            return Err(Error::InvalidInput(format!(
                "spec does not match the {} structure",
                self.label()
            )));
        }
        let mut theta = spec.b()[..=self.q].to_vec();
        for eigs in spec.eigenvalues() {
            let mut eigs = eigs.clone();
            canonical_order(&mut eigs);
            for l in eigs.iter().filter(|l| l.im > 0.0) {
                theta.push(l.re);
                theta.push(l.im);
            }
            for l in eigs.iter().filter(|l| l.im == 0.0) {
                theta.push(l.re);
            }
        }
        Ok(theta)
    }

    /// Rewrites `theta` in canonical order.
    pub fn canonicalize(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.theta_of(&self.to_spec(theta)?)
    }

    /// Default compact parameter box: `b_0 in [0, 10]`, other MA coefficients in
    /// `[-10, 10]`, real parts in `[-10, -1e-3]`, imaginary parts below `π/Δ_i`.
    pub fn default_bounds(&self, delta: &[f64]) -> Bounds {
        let mut lower = vec![0.0];
        let mut upper = vec![10.0];
        for _ in 0..self.q {
            lower.push(-10.0);
            upper.push(10.0);
        }
        for axis in 0..self.d {
            let band = std::f64::consts::PI / delta[axis.min(delta.len() - 1)];
            for _ in 0..self.complex_pairs[axis] {
                lower.extend([-10.0, 0.0]);
                upper.extend([-1e-3, band * (1.0 - 1e-9)]);
            }
            for _ in 2 * self.complex_pairs[axis]..self.p {
                lower.push(-10.0);
                upper.push(-1e-3);
            }
        }
        Bounds { lower, upper }
    }
}

/// Sorts eigenvalues by decreasing real part, then decreasing imaginary part.
pub fn canonical_order(eigs: &mut [Complex64]) {
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Same spec with every axis's eigenvalues in canonical order.
pub fn canonicalize_spec(spec: &CarmaSpec) -> CarmaSpec {
    let mut eigenvalues = spec.eigenvalues().to_vec();
    for eigs in &mut eigenvalues {
        canonical_order(eigs);
    }
    CarmaSpec::with_tolerances(spec.b()[..=spec.q()].to_vec(), eigenvalues, spec.kappa2(), *spec.tolerances())
        .expect("reordering preserves validity")
}
