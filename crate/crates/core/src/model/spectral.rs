use num_complex::Complex64;

use super::companion::{companion_for_axis, CompanionMatrix};
use super::kernel::check_dim;
use super::spec::CarmaSpec;
use crate::error::Result;

/// Spectral density `f(omega) = kappa2 / (2 pi)^d |Q(i omega) / P(i omega)|^2`.
pub fn spectral_density(spec: &CarmaSpec, omega: &[f64]) -> Result<f64> {
    check_dim(spec, omega)?;
    let companions = spec
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(axis, eigs)| companion_for_axis(eigs, axis, 0.0, spec.tolerances().poly_imag))
        .collect::<Result<Vec<_>>>()?;
    let z: Vec<Complex64> = omega.iter().map(|&w| Complex64::new(0.0, w)).collect();

    let denominator: Complex64 = companions.iter().zip(&z).map(|(c, &zi)| c.eval(zi)).product();
    assert!(denominator.norm() > 0.0, "characteristic polynomial vanishes on the imaginary axis");

    let mut row: Vec<Complex64> = spec.b().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for (c, &zi) in companions.iter().zip(&z) {
        let q = adjugate_polynomial(c, zi);
        let p = row.len();
        row = (0..p).map(|l| (0..p).map(|k| row[k] * q[k][l]).sum()).collect();
    }
    let numerator = row[row.len() - 1];
    let scale = spec.kappa2() / (2.0 * std::f64::consts::PI).powi(spec.d() as i32);
    Ok(scale * (numerator / denominator).norm_sqr())
}

/// Matrix polynomial `a(z) (zI - A)^{-1}` written entrywise in the polynomial coefficients.
fn adjugate_polynomial(companion: &CompanionMatrix, z: Complex64) -> Vec<Vec<Complex64>> {
    let a = companion.coeffs();
    let p = a.len();
    let pow = |e: usize| z.powu(e as u32);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); p]; p];
    for k in 1..=p {
        for l in 1..=p {
            // exponents below are p - 1 - j + k - l, non-negative in each branch
            out[k - 1][l - 1] = if k <= l {
                let mut v = pow(p - 1 + k - l);
                for j in 1..=(p - l) {
                    v += a[j - 1] * pow(p - 1 - j + k - l);
                }
                v
            } else {
                let mut v = Complex64::new(0.0, 0.0);
                for j in (p - l + 1)..=p {
                    v -= a[j - 1] * pow(p - 1 + k - l - j);
                }
                v
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel_coefficients;

    #[test]
    fn car1_density() {
        let spec = CarmaSpec::real(&[1.0], &[&[-1.0]], 1.0).unwrap();
        let f = spectral_density(&spec, &[0.0]).unwrap();
        assert!((f - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let spec = CarmaSpec::real(&[2.0], &[&[-3.0]], 0.5).unwrap();
        let f = spectral_density(&spec, &[1.5]).unwrap();
        let expected = 0.5 * 4.0 / (2.0 * std::f64::consts::PI * (9.0 + 2.25));
        assert!((f - expected).abs() < 1e-15);
    }

    #[test]
    fn matches_resolvent_expansion() {
        let eigs = vec![
            vec![Complex64::new(-0.5, 1.2), Complex64::new(-0.5, -1.2), Complex64::new(-2.0, 0.0)],
            vec![Complex64::new(-1.0, 0.0), Complex64::new(-0.3, 0.0), Complex64::new(-2.2, 0.0)],
        ];
        let spec = CarmaSpec::new(vec![1.0, 0.5, -0.2], eigs, 1.7).unwrap();
        let coef = kernel_coefficients(&spec).unwrap();
        for omega in [[0.0, 0.0], [0.7, -1.3], [-2.5, 4.0]] {
            let mut transfer = Complex64::new(0.0, 0.0);
            for (k, c) in coef.iter() {
                let mut term = c;
                for i in 0..2 {
                    term /= Complex64::new(0.0, omega[i]) - spec.eigenvalues()[i][k[i]];
                }
                transfer += term;
            }
            let expected = 1.7 * transfer.norm_sqr() / (2.0 * std::f64::consts::PI).powi(2);
            let f = spectral_density(&spec, &omega).unwrap();
            assert!((f - expected).abs() < 1e-12 * expected.max(1.0), "{f} vs {expected}");
        }
    }
}
