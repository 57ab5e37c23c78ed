use num_complex::Complex64;

use super::kernel::{check_dim, Kernel, KernelCoefficients};
use super::spec::CarmaSpec;
use crate::error::Result;

/// Precomputed second-order structure of a CARMA field.
///
/// For every pair of kernel index tuples `(k, k')` the weight
/// `d(k) d(k') / prod_i (-(lambda_{i,k_i} + lambda_{i,k'_i}))` is stored, so
/// that `gamma(t) = kappa2 * sum w * prod_i exp(mu_i |t_i|)` with `mu_i` taken
/// from `k'` when `t_i >= 0` and from `k` otherwise.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    d: usize,
    p: usize,
    kappa2: f64,
    imag_tol: f64,
    eigenvalues: Vec<Vec<Complex64>>,
    /// `2d` indices per pair: first `k`, then `k'`.
    indices: Vec<usize>,
    weights: Vec<Complex64>,
    gamma0: f64,
    /// `kappa2 sum |w|`, the size of the terms that cancel in the sum.
    term_scale: f64,
}

impl CovarianceModel {
    pub fn new(spec: &CarmaSpec) -> Result<Self> {
        let kernel = Kernel::new(spec)?;
        Ok(Self::from_coefficients(
            kernel.coefficients(),
            spec.kappa2(),
            spec.tolerances().imag_residue,
        ))
    }

    pub(crate) fn from_coefficients(coef: &KernelCoefficients, kappa2: f64, imag_tol: f64) -> Self {
        let d = coef.d();
        let p = coef.p();
        let eigenvalues = coef.eigenvalues().to_vec();
        let n = coef.entries().len();
        let tuples: Vec<Vec<usize>> = (0..n).map(|f| coef.index_tuple(f)).collect();
        let mut indices = Vec::with_capacity(n * n * 2 * d);
        let mut weights = Vec::with_capacity(n * n);
        for (a, ka) in tuples.iter().enumerate() {
            for (b, kb) in tuples.iter().enumerate() {
                let mut w = coef.entries()[a] * coef.entries()[b];
                for i in 0..d {
                    w /= -(eigenvalues[i][ka[i]] + eigenvalues[i][kb[i]]);
                }
                indices.extend_from_slice(ka);
                indices.extend_from_slice(kb);
                weights.push(w);
            }
        }
        let gamma0 = kappa2 * weights.iter().sum::<Complex64>().re;
        let term_scale = kappa2 * weights.iter().map(|w| w.norm()).sum::<f64>();
        Self {
            d,
            p,
            kappa2,
            imag_tol,
            eigenvalues,
            indices,
            weights,
            gamma0,
            term_scale,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn eigenvalues(&self) -> &[Vec<Complex64>] {
        &self.eigenvalues
    }

    /// Pair weights with their index tuples `(k, k')`, without the `kappa2` factor.
    pub fn pair_terms(&self) -> impl Iterator<Item = (&[usize], &[usize], Complex64)> + '_ {
        self.indices
            .chunks_exact(2 * self.d)
            .zip(&self.weights)
            .map(move |(idx, &w)| (&idx[..self.d], &idx[self.d..], w))
    }

    pub fn variance(&self) -> f64 {
        self.gamma0
    }

    /// Autocovariance before the imaginary residue is dropped.
    pub fn autocovariance_complex(&self, t: &[f64]) -> Complex64 {
        assert_eq!(t.len(), self.d, "lag dimension mismatch");
        let p = self.p;
        let mut table = Vec::with_capacity(self.d * p);
        for (eigs, &x) in self.eigenvalues.iter().zip(t) {
            table.extend(eigs.iter().map(|l| (l * x.abs()).exp()));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (idx, &w) in self.indices.chunks_exact(2 * self.d).zip(&self.weights) {
            let mut term = w;
            for i in 0..self.d {
                let m = if t[i] >= 0.0 { idx[self.d + i] } else { idx[i] };
                term *= table[i * p + m];
            }
            total += term;
        }
        total * self.kappa2
    }

    pub fn autocovariance(&self, t: &[f64]) -> f64 {
        let g = self.autocovariance_complex(t);
        debug_assert!(
            g.im.abs() <= self.imag_tol.max(1e-9 * g.re.abs().max(self.term_scale)),
            "imaginary residue {} in autocovariance",
            g.im
        );
        g.re
    }

    pub fn variogram(&self, t: &[f64]) -> f64 {
        (2.0 * (self.gamma0 - self.autocovariance(t))).max(0.0)
    }

    /// Coefficients `d*` of the variogram restricted to one coordinate axis,
    /// `psi(tau e_axis) = 2 kappa2 sum d*(mu) (1 - exp(mu |tau|))`.
    pub fn axis_coefficients(&self, axis: usize) -> Vec<(Complex64, Complex64)> {
        assert!(axis < self.d, "axis out of range");
        let mut sums = vec![Complex64::new(0.0, 0.0); self.p];
        for (idx, &w) in self.indices.chunks_exact(2 * self.d).zip(&self.weights) {
            sums[idx[self.d + axis]] += w;
        }
        self.eigenvalues[axis].iter().copied().zip(sums).collect()
    }

    /// Variogram along one axis evaluated from the axis coefficients.
    pub fn axis_variogram(&self, axis: usize, tau: f64) -> f64 {
        let sum: Complex64 = self
            .axis_coefficients(axis)
            .into_iter()
            .map(|(mu, c)| c * (1.0 - (mu * tau.abs()).exp()))
            .sum();
        2.0 * self.kappa2 * sum.re
    }
}

/// Autocovariance `gamma(t) = Cov[Y(s + t), Y(s)]`.
pub fn autocovariance(spec: &CarmaSpec, t: &[f64]) -> Result<f64> {
    check_dim(spec, t)?;
    Ok(CovarianceModel::new(spec)?.autocovariance(t))
}

/// Variogram `psi(t) = 2 (gamma(0) - gamma(t))`.
pub fn variogram(spec: &CarmaSpec, t: &[f64]) -> Result<f64> {
    check_dim(spec, t)?;
    Ok(CovarianceModel::new(spec)?.variogram(t))
}

/// Axis coefficients `d*` of the variogram along `axis` (zero-based), paired with
/// the eigenvalue they multiply.
pub fn axis_variogram_coefficients(spec: &CarmaSpec, axis: usize) -> Result<Vec<(Complex64, Complex64)>> {
    if axis >= spec.d() {
        return Err(crate::error::Error::InvalidInput(format!(
            "axis {axis} out of range for dimension {}",
            spec.d()
        )));
    }
    Ok(CovarianceModel::new(spec)?.axis_coefficients(axis))
}
