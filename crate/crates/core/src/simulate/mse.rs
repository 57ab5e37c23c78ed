use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::advance;
use crate::model::{CarmaSpec, CovarianceModel, Kernel, KernelEvaluator};
use crate::quadrature::gauss_legendre;

/// Mean squared error at the origin of the compound-Poisson simulator that keeps
/// only the jumps in `[-m, m]^d`: `kappa2` times the kernel energy outside `[0, m]^d`.
pub fn mse_truncation_cp(spec: &CarmaSpec, m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::InvalidInput(format!("truncation radius must be non-negative, got {m}")));
    }
    let model = CovarianceModel::new(spec)?;
    let eigs = model.eigenvalues();
    let mut total = Complex64::new(0.0, 0.0);
    for (k, kp, w) in model.pair_terms() {
        let mut inside = Complex64::new(1.0, 0.0);
        for i in 0..spec.d() {
            let sigma = eigs[i][k[i]] + eigs[i][kp[i]];
            inside *= -expm1(sigma * m);
        }
        total += w * (1.0 - inside);
    }
    Ok((spec.kappa2() * total.re).max(0.0))
}

/// How [`mse_discretization_with`] evaluates the kernel-error integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseMethod {
    /// Per-eigenvalue-pair geometric sums; exact for real and complex eigenvalues.
    ClosedForm,
    /// Gauss-Legendre quadrature over every kernel cell, plus the exact kernel
    /// energy outside the sampled box.
    Quadrature,
}

/// Mean squared error `kappa2 ∫ (g - g_S)^2` of the truncated, discretized
/// simulator, where `g_S` is the piecewise-constant kernel that takes the value
/// `g(jΔ)` on the cell `[jΔ, (j+1)Δ)` for `j in {0..M}^d`.
pub fn mse_discretization(spec: &CarmaSpec, delta: f64, m: usize) -> Result<f64> {
    mse_discretization_with(spec, delta, m, MseMethod::ClosedForm)
}

pub fn mse_discretization_with(spec: &CarmaSpec, delta: f64, m: usize, method: MseMethod) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) || m == 0 {
        return Err(Error::InvalidInput("need a positive spacing and at least one step".into()));
    }
    match method {
        MseMethod::ClosedForm => closed_form(spec, delta, Some(m)),
        MseMethod::Quadrature => quadrature(spec, delta, m),
    }
}

/// Limit of [`mse_discretization`] as `M -> ∞` at fixed spacing: the error left
/// by discretization alone.
pub fn mse_discretization_floor(spec: &CarmaSpec, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput("need a positive spacing".into()));
    }
    closed_form(spec, delta, None)
}

fn closed_form(spec: &CarmaSpec, delta: f64, m: Option<usize>) -> Result<f64> {
    let kernel = Kernel::new(spec)?;
    let coef = kernel.coefficients();
    let eigs = coef.eigenvalues();
    let tuples: Vec<Vec<usize>> = (0..coef.entries().len()).map(|f| coef.index_tuple(f)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for (a, ka) in tuples.iter().enumerate() {
        for (b, kb) in tuples.iter().enumerate() {
            let mut exact = Complex64::new(1.0, 0.0);
            let mut cross = Complex64::new(1.0, 0.0);
            let mut sampled = Complex64::new(1.0, 0.0);
            for i in 0..spec.d() {
                let la = eigs[i][ka[i]];
                let lb = eigs[i][kb[i]];
                let sigma = la + lb;
                let steps = match m {
                    Some(m) => expm1(sigma * delta * (m + 1) as f64) / expm1(sigma * delta),
                    None => -1.0 / expm1(sigma * delta),
                };
                exact /= -sigma;
                cross *= expm1(la * delta) / la * steps;
                sampled *= delta * steps;
            }
            total += coef.entries()[a] * coef.entries()[b] * (exact - 2.0 * cross + sampled);
        }
    }
    Ok((spec.kappa2() * total.re).max(0.0))
}

fn quadrature(spec: &CarmaSpec, delta: f64, m: usize) -> Result<f64> {
    const NODES: usize = 12;
    let d = spec.d();
    let model = CovarianceModel::new(spec)?;
    let kernel = KernelEvaluator::new(Kernel::new(spec)?.coefficients());
    let (x, w) = gauss_legendre(NODES);
    let side = vec![m + 1; d];
    let nodes = vec![NODES; d];
    let mut cell = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut corner = vec![0.0; d];
    // ∫_box g^2 - ∫_box (g - g_S)^2, accumulated cell by cell
    let mut captured = 0.0;
    loop {
        for i in 0..d {
            corner[i] = cell[i] as f64 * delta;
        }
        let level = kernel.eval(&corner);
        let mut node = vec![0usize; d];
        let mut cell_sum = 0.0;
        loop {
            let mut weight = 1.0;
            for i in 0..d {
                point[i] = corner[i] + 0.5 * delta * (x[node[i]] + 1.0);
                weight *= 0.5 * delta * w[node[i]];
            }
            let g = kernel.eval(&point);
            cell_sum += weight * (g * g - (g - level) * (g - level));
            if !advance(&mut node, &nodes) {
                break;
            }
        }
        captured += cell_sum;
        if !advance(&mut cell, &side) {
            break;
        }
    }
    Ok((model.variance() - spec.kappa2() * captured).max(0.0))
}

/// `exp(z) - 1` without cancellation near zero.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        z * (1.0 + z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0 * (1.0 + z / 5.0))))
    } else {
        z.exp() - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn car1_truncation_error() {
        let spec = CarmaSpec::real(&[1.0], &[&[-1.0]], 1.0).unwrap();
        let v = mse_truncation_cp(&spec, 2.0).unwrap();
        assert!((v - (-4.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((mse_truncation_cp(&spec, 0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn car1_discretization_error_by_hand() {
        // g = e^{-x}; g_S = e^{-jΔ} on [jΔ, (j+1)Δ) for j <= M
        let (delta, m) = (0.25, 8usize);
        let spec = CarmaSpec::real(&[1.0], &[&[-1.0]], 1.0).unwrap();
        let mut expected = (-2.0 * (m + 1) as f64 * delta).exp() / 2.0;
        for j in 0..=m {
            let a = j as f64 * delta;
            let c = (-a).exp();
            // ∫_a^{a+Δ} (e^{-x} - c)^2 dx
            let e2 = ((-2.0 * a).exp() - (-2.0 * (a + delta)).exp()) / 2.0;
            let e1 = (-a).exp() - (-(a + delta)).exp();
            expected += e2 - 2.0 * c * e1 + c * c * delta;
        }
        let v = mse_discretization(&spec, delta, m).unwrap();
        assert!((v - expected).abs() < 1e-14, "{v} vs {expected}");
    }

    #[test]
    fn floor_is_limit() {
        let spec = CarmaSpec::real(&[1.0, 0.5], &[&[-1.0, -2.0]], 1.0).unwrap();
        let floor = mse_discretization_floor(&spec, 0.1).unwrap();
        let big = mse_discretization(&spec, 0.1, 2000).unwrap();
        assert!((floor - big).abs() < 1e-14);
    }
}
