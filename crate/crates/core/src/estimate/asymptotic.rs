use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::params::ModelStructure;
use super::variogram::physical;
use crate::error::{Error, Result};
use crate::model::{CovarianceModel, Kernel};
use crate::simulate::LevyBasisSpec;

const DESIGN_CONDITION_LIMIT: f64 = 1e12;

/// Asymptotic covariance `B Ξ^T W F V F^T W Ξ B` of `N^{d/2} (θ* - θ0)` for the
/// weighted least-squares estimator with lags `lags` (grid units) and weights
/// `weights`.
///
/// `V` is the limiting covariance of the empirical autocovariances at lag zero
/// and at the fitted lags. Its lattice sums are evaluated in closed form: every
/// factor is a piecewise exponential per axis, so each sum splits into
/// geometric series.
pub fn asymptotic_covariance(
    theta0: &[f64],
    structure: &ModelStructure,
    lags: &[Vec<i64>],
    delta: &[f64],
    weights: &[f64],
    basis: &LevyBasisSpec,
) -> Result<DMatrix<f64>> {
    if weights.len() != lags.len() || lags.is_empty() {
        return Err(Error::InvalidInput("need one weight per lag".into()));
    }
    if (basis.kappa2() - structure.kappa2).abs() > 1e-12 * structure.kappa2 {
        return Err(Error::InvalidInput(format!(
            "noise variance {} differs from the model's {}",
            basis.kappa2(),
            structure.kappa2
        )));
    }
    let spec = structure.to_spec(theta0)?;
    let k = lags.len();
    let p = structure.parameter_count();

    let jacobian = variogram_jacobian(theta0, structure, lags, delta)?;
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(weights));
    let info = jacobian.transpose() * &w * &jacobian;
    let condition = symmetric_condition(&info);
    if !(condition <= DESIGN_CONDITION_LIMIT) {
        return Err(Error::SingularDesign { condition });
    }
    let b = info
        .clone()
        .try_inverse()
        .ok_or(Error::SingularDesign { condition })?;

    let sums = LatticeSums::new(&spec, delta)?;
    let mut all_lags = vec![vec![0i64; structure.d]];
    all_lags.extend(lags.iter().cloned());
    let v = sums.autocovariance_covariance(&all_lags, basis.fourth_cumulant());

    // F V F^T with F = 2 [1 | -I]
    let mut fvf = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            fvf[(r, c)] = 4.0 * (v[(0, 0)] - v[(0, c + 1)] - v[(r + 1, 0)] + v[(r + 1, c + 1)]);
        }
    }
    let middle = jacobian.transpose() * &w * fvf * &w * &jacobian;
    let sigma = &b * middle * &b;
    let sym = (&sigma + sigma.transpose()) * 0.5;
    debug_assert_eq!(sym.nrows(), p);
    Ok(sym)
}

/// Central finite differences of the model variogram at the lags with respect
/// to the parameters, step `1e-5 max(|θ_k|, 1)`.
pub fn variogram_jacobian(
    theta: &[f64],
    structure: &ModelStructure,
    lags: &[Vec<i64>],
    delta: &[f64],
) -> Result<DMatrix<f64>> {
    let points: Vec<Vec<f64>> = lags.iter().map(|lag| physical(lag, delta)).collect();
    let eval = |t: &[f64]| -> Option<Vec<f64>> {
        let model = CovarianceModel::new(&structure.to_spec(t).ok()?).ok()?;
        Some(points.iter().map(|x| model.variogram(x)).collect())
    };
    let center = eval(theta).ok_or_else(|| Error::InvalidInput("invalid parameter vector".into()))?;
    let mut jac = DMatrix::zeros(lags.len(), theta.len());
    for k in 0..theta.len() {
        let h = 1e-5 * theta[k].abs().max(1.0);
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[k] += h;
        minus[k] -= h;
        let column: Vec<f64> = match (eval(&plus), eval(&minus)) {
            (Some(a), Some(b)) => a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect(),
            (Some(a), None) => a.iter().zip(&center).map(|(x, y)| (x - y) / h).collect(),
            (None, Some(b)) => center.iter().zip(&b).map(|(x, y)| (x - y) / h).collect(),
            (None, None) => {
                return Err(Error::InvalidInput(format!("parameter {k} cannot be perturbed")));
            }
        };
        for (j, v) in column.into_iter().enumerate() {
            jac[(j, k)] = v;
        }
    }
    Ok(jac)
}

fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Closed-form lattice sums of products of autocovariances and kernels.
pub struct LatticeSums {
    d: usize,
    p: usize,
    delta: Vec<f64>,
    kappa2: f64,
    eigenvalues: Vec<Vec<Complex64>>,
    coefficients: Vec<Complex64>,
    /// For each autocovariance term: weight and per-axis `(k, k')` codes `k p + k'`.
    pair_weights: Vec<Complex64>,
    pair_codes: Vec<Vec<usize>>,
}

impl LatticeSums {
    pub fn new(spec: &crate::model::CarmaSpec, delta: &[f64]) -> Result<Self> {
        if delta.len() != spec.d() {
            return Err(Error::InvalidInput("one spacing per axis required".into()));
        }
        let kernel = Kernel::new(spec)?;
        let model = CovarianceModel::new(spec)?;
        let p = spec.p();
        let mut pair_weights = Vec::new();
        let mut pair_codes = Vec::new();
        for (k, kp, w) in model.pair_terms() {
            pair_weights.push(w);
            pair_codes.push(k.iter().zip(kp).map(|(a, b)| a * p + b).collect());
        }
        Ok(Self {
            d: spec.d(),
            p,
            delta: delta.to_vec(),
            kappa2: spec.kappa2(),
            eigenvalues: spec.eigenvalues().to_vec(),
            coefficients: kernel.coefficients().entries().to_vec(),
            pair_weights,
            pair_codes,
        })
    }

    /// Matrix `V` over the given lags (grid units), the first of which is
    /// normally the zero lag.
    pub fn autocovariance_covariance(&self, lags: &[Vec<i64>], fourth_cumulant: f64) -> DMatrix<f64> {
        let n = lags.len();
        let mut gamma_cache = GammaProductCache::new(self);
        let mut quartic_cache = QuarticCache::new(self);
        let mut v = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let diff: Vec<i64> = lags[i].iter().zip(&lags[j]).map(|(a, b)| a - b).collect();
                let sum: Vec<i64> = lags[i].iter().zip(&lags[j]).map(|(a, b)| -a - b).collect();
                let mut value = gamma_cache.get(&diff) + gamma_cache.get(&sum);
                if fourth_cumulant != 0.0 {
                    value += fourth_cumulant * quartic_cache.get(&lags[i], &lags[j]);
                }
                v[(i, j)] = value;
                v[(j, i)] = value;
            }
        }
        v
    }

    /// `sum_l gamma(l) gamma(l + h)` over the lattice.
    pub fn gamma_product_sum(&self, h: &[i64]) -> f64 {
        GammaProductCache::new(self).get(h)
    }

    /// `sum_l ∫ g(s) g(s + a) g(s + l) g(s + l + c) ds` over the lattice.
    pub fn kernel_quartic_sum(&self, a: &[i64], c: &[i64]) -> f64 {
        QuarticCache::new(self).get(a, c)
    }
}

struct GammaProductCache<'a> {
    sums: &'a LatticeSums,
    axis_tables: Vec<HashMap<i64, Vec<Complex64>>>,
    values: HashMap<Vec<i64>, f64>,
}

impl<'a> GammaProductCache<'a> {
    fn new(sums: &'a LatticeSums) -> Self {
        Self {
            sums,
            axis_tables: vec![HashMap::new(); sums.d],
            values: HashMap::new(),
        }
    }

    fn get(&mut self, h: &[i64]) -> f64 {
        // the sum is symmetric under h -> -h
        let key: Vec<i64> = if h.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
            h.iter().map(|x| -x).collect()
        } else {
            h.to_vec()
        };
        if let Some(&v) = self.values.get(&key) {
            return v;
        }
        let s = self.sums;
        let p2 = s.p * s.p;
        for axis in 0..s.d {
            let table = self.axis_tables[axis].entry(key[axis]).or_insert_with(|| {
                let eigs = &s.eigenvalues[axis];
                let mut t = Vec::with_capacity(p2 * p2);
                for c1 in 0..p2 {
                    for c2 in 0..p2 {
                        let (b1, a1) = (eigs[c1 / s.p], eigs[c1 % s.p]);
                        let (b2, a2) = (eigs[c2 / s.p], eigs[c2 % s.p]);
                        t.push(piecewise_product_sum(a1, b1, a2, b2, key[axis], s.delta[axis]));
                    }
                }
                t
            });
            let _ = table;
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (wp, cp) in s.pair_weights.iter().zip(&s.pair_codes) {
            for (wq, cq) in s.pair_weights.iter().zip(&s.pair_codes) {
                let mut term = wp * wq;
                for axis in 0..s.d {
                    term *= self.axis_tables[axis][&key[axis]][cp[axis] * p2 + cq[axis]];
                }
                total += term;
            }
        }
        let value = s.kappa2 * s.kappa2 * total.re;
        self.values.insert(key, value);
        value
    }
}

/// `sum_{n in Z} phi_1(n Δ) phi_2((n + shift) Δ)` where `phi(x) = exp(a x)` for
/// `x >= 0` and `exp(b |x|)` for `x < 0`.
fn piecewise_product_sum(a1: Complex64, b1: Complex64, a2: Complex64, b2: Complex64, shift: i64, delta: f64) -> Complex64 {
    let sd = shift as f64 * delta;
    // both arguments non-negative: n >= max(0, -shift)
    let n0 = (-shift).max(0) as f64;
    let upper = ((a1 * n0 + a2 * (n0 + shift as f64)) * delta).exp() * tail((a1 + a2) * delta);
    // both negative: n = -m with m >= max(1, shift + 1)
    let m0 = (shift + 1).max(1) as f64;
    let lower = ((b1 * m0 + b2 * (m0 - shift as f64)) * delta).exp() * tail((b1 + b2) * delta);
    let middle = if shift > 0 {
        // n = -m, m in 1..=shift: first argument negative, second non-negative
        (a2 * sd).exp() * ((b1 - a2) * delta).exp() * geometric((b1 - a2) * delta, shift as u64)
    } else if shift < 0 {
        // n in 0..|shift|: first argument non-negative, second negative
        (-b2 * sd).exp() * geometric((a1 - b2) * delta, shift.unsigned_abs())
    } else {
        Complex64::new(0.0, 0.0)
    };
    upper + lower + middle
}

/// `sum_{m >= 0} exp(z m)` for `Re z < 0`.
fn tail(z: Complex64) -> Complex64 {
    -1.0 / crate::simulate::mse::expm1(z)
}

/// `sum_{m = 0}^{count - 1} exp(z m)`.
fn geometric(z: Complex64, count: u64) -> Complex64 {
    if z.norm() < 1e-14 {
        Complex64::new(count as f64, 0.0)
    } else {
        crate::simulate::mse::expm1(z * count as f64) / crate::simulate::mse::expm1(z)
    }
}

struct QuarticCache<'a> {
    sums: &'a LatticeSums,
    axis_tables: Vec<HashMap<(i64, i64), Vec<Complex64>>>,
}

impl<'a> QuarticCache<'a> {
    fn new(sums: &'a LatticeSums) -> Self {
        Self {
            sums,
            axis_tables: vec![HashMap::new(); sums.d],
        }
    }

    fn get(&mut self, a: &[i64], c: &[i64]) -> f64 {
        let s = self.sums;
        let p = s.p;
        let p4 = p * p * p * p;
        for axis in 0..s.d {
            self.axis_tables[axis].entry((a[axis], c[axis])).or_insert_with(|| {
                let eigs = &s.eigenvalues[axis];
                let mut t = Vec::with_capacity(p4);
                for code in 0..p4 {
                    let mu = [
                        eigs[code / (p * p * p)],
                        eigs[(code / (p * p)) % p],
                        eigs[(code / p) % p],
                        eigs[code % p],
                    ];
                    t.push(quartic_axis_sum(mu, a[axis], c[axis], s.delta[axis]));
                }
                t
            });
        }
        let tables: Vec<&Vec<Complex64>> = (0..s.d)
            .map(|axis| &self.axis_tables[axis][&(a[axis], c[axis])])
            .collect();
        let m = s.coefficients.len();
        let tuples: Vec<Vec<usize>> = (0..m)
            .map(|mut flat| {
                let mut t = vec![0; s.d];
                for slot in t.iter_mut().rev() {
                    *slot = flat % p;
                    flat /= p;
                }
                t
            })
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for k1 in 0..m {
            for k2 in 0..m {
                let c12 = s.coefficients[k1] * s.coefficients[k2];
                for k3 in 0..m {
                    let c123 = c12 * s.coefficients[k3];
                    for k4 in 0..m {
                        let mut term = c123 * s.coefficients[k4];
                        for axis in 0..s.d {
                            let code = ((tuples[k1][axis] * p + tuples[k2][axis]) * p + tuples[k3][axis]) * p
                                + tuples[k4][axis];
                            term *= tables[axis][code];
                        }
                        total += term;
                    }
                }
            }
        }
        total.re
    }
}

/// One-axis factor `sum_n ∫ e^{mu1 s} e^{mu2 (s+a)} e^{mu3 (s+nΔ)} e^{mu4 (s+nΔ+c)} ds`
/// over the region where all four arguments are non-negative; `a` and `c` in grid units.
fn quartic_axis_sum(mu: [Complex64; 4], a: i64, c: i64, delta: f64) -> Complex64 {
    let total = mu[0] + mu[1] + mu[2] + mu[3];
    let c1 = (-a).max(0);
    let c2 = (-c).max(0);
    // the lower integration limit is c1 for n >= c2 - c1 and c2 - n otherwise
    let split = (c2 - c1) as f64;
    let (c1, c2) = (c1 as f64 * delta, c2 as f64 * delta);
    let front = (mu[1] * a as f64 * delta + mu[3] * c as f64 * delta).exp() / (-total);
    let high = (total * c1 + (mu[2] + mu[3]) * split * delta).exp() * tail((mu[2] + mu[3]) * delta);
    let low = (total * c2 - (mu[0] + mu[1]) * (split - 1.0) * delta).exp() * tail((mu[0] + mu[1]) * delta);
    front * (high + low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CarmaSpec;

    #[test]
    fn gamma_product_sum_matches_truncated_lattice_sum() {
        let spec = CarmaSpec::real(&[1.0, 0.6], &[&[-0.9, -2.1], &[-1.3, -0.5]], 1.4).unwrap();
        let delta = [0.3, 0.2];
        let sums = LatticeSums::new(&spec, &delta).unwrap();
        let model = CovarianceModel::new(&spec).unwrap();
        for h in [[0i64, 0], [2, 0], [-1, 3], [4, -2]] {
            let mut brute = 0.0;
            for l0 in -150i64..=150 {
                for l1 in -250i64..=250 {
                    let x = [l0 as f64 * delta[0], l1 as f64 * delta[1]];
                    let y = [(l0 + h[0]) as f64 * delta[0], (l1 + h[1]) as f64 * delta[1]];
                    brute += model.autocovariance(&x) * model.autocovariance(&y);
                }
            }
            let exact = sums.gamma_product_sum(&h);
            assert!((exact - brute).abs() < 1e-10 * brute.abs().max(1.0), "{h:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn quartic_sum_matches_quadrature_for_car1() {
        // g(s) = b e^{-λ s}: the per-lattice-point integral is elementary
        let (b, lam, delta) = (1.3, 0.7, 0.25);
        let spec = CarmaSpec::real(&[b], &[&[-lam]], 1.0).unwrap();
        let sums = LatticeSums::new(&spec, &[delta]).unwrap();
        for (a, c) in [(0i64, 0i64), (3, 1), (-2, 4), (2, -5)] {
            let (af, cf) = (a as f64 * delta, c as f64 * delta);
            let mut brute = 0.0;
            for n in -400i64..=400 {
                let nf = n as f64 * delta;
                let lo = [0.0, -af, -nf, -nf - cf].into_iter().fold(f64::NEG_INFINITY, f64::max);
                // ∫_lo^∞ b^4 e^{-λ(4s + a + 2nΔ + c)} ds
                brute += b.powi(4) * (-lam * (4.0 * lo + af + 2.0 * nf + cf)).exp() / (4.0 * lam);
            }
            let exact = sums.kernel_quartic_sum(&[a], &[c]);
            assert!((exact - brute).abs() < 1e-12 * brute.max(1.0), "({a},{c}): {exact} vs {brute}");
        }
    }
}
