mod common;

use carma_field::model::{kernel_eval, spectral_density, CarmaSpec, CovarianceModel, Kernel};
use carma_field::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use common::*;

fn spec_strategy() -> impl Strategy<Value = CarmaSpec> {
    (any::<u64>(), 1usize..=3, 1usize..=3).prop_flat_map(|(seed, d, p)| {
        (0..p).prop_map(move |q| random_spec(&mut rng(seed), d, p, q, 0.4))
    })
}

fn lag_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, d)
}

/// `κ2 (2π)^-d |b' Π (iω_i - A_i)^-1 e_p|^2` through complex resolvents.
fn resolvent_density(spec: &CarmaSpec, omega: &[f64]) -> f64 {
    let kernel = MatrixKernel::new(spec);
    let p = kernel.p;
    let mut row = kernel.b.map(|x| Complex64::new(x, 0.0)).transpose();
    for (a, &w) in kernel.a.iter().zip(omega) {
        let shifted = DMatrix::from_diagonal_element(p, p, Complex64::new(0.0, w)) - a.map(|x| Complex64::new(x, 0.0));
        row *= shifted.try_inverse().unwrap();
    }
    let scale = spec.kappa2() / (2.0 * std::f64::consts::PI).powi(spec.d() as i32);
    scale * row[p - 1].norm_sqr()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_matches_matrix_exponential(spec in spec_strategy(), raw in prop::collection::vec(0.0f64..3.0, 3)) {
        let s = &raw[..spec.d()];
        let reference = MatrixKernel::new(&spec).eval(s);
        let got = kernel_eval(&spec, s).unwrap();
        let scale = spec.b().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!((got - reference).abs() <= 1e-10 * scale, "{got} vs {reference}");
    }

    #[test]
    fn kernel_vanishes_off_the_orthant(spec in spec_strategy(), raw in prop::collection::vec(-3.0f64..-1e-9, 3)) {
        let k = Kernel::new(&spec).unwrap();
        let mut s = vec![1.0; spec.d()];
        s[0] = raw[0];
        prop_assert_eq!(k.eval(&s), 0.0);
    }

    #[test]
    fn variogram_invariants(spec in spec_strategy(), raw in lag_strategy(3)) {
        let model = CovarianceModel::new(&spec).unwrap();
        let t = &raw[..spec.d()];
        let neg: Vec<f64> = t.iter().map(|x| -x).collect();
        let var = model.variance();
        let psi = model.variogram(t);
        prop_assert!(var > 0.0);
        prop_assert!(psi >= -1e-12 * var);
        prop_assert!(psi <= 4.0 * var * (1.0 + 1e-12));
        prop_assert!((psi - model.variogram(&neg)).abs() <= 1e-12 * var);
        prop_assert!(model.autocovariance(t).abs() <= var * (1.0 + 1e-12));
        prop_assert!((psi - 2.0 * (var - model.autocovariance(t))).abs() <= 1e-12 * var);
        prop_assert_eq!(model.variogram(&vec![0.0; spec.d()]), 0.0);
    }

    #[test]
    fn kappa2_scales_second_order_structure(spec in spec_strategy(), raw in lag_strategy(3), factor in 0.1f64..10.0) {
        let t = &raw[..spec.d()];
        let scaled = spec.with_kappa2(spec.kappa2() * factor).unwrap();
        let (a, b) = (CovarianceModel::new(&spec).unwrap(), CovarianceModel::new(&scaled).unwrap());
        prop_assert!((b.autocovariance(t) - factor * a.autocovariance(t)).abs() <= 1e-12 * factor * a.variance());
    }

    #[test]
    fn axis_variogram_matches_full_variogram(spec in spec_strategy(), tau in -5.0f64..5.0) {
        let model = CovarianceModel::new(&spec).unwrap();
        for axis in 0..spec.d() {
            let mut t = vec![0.0; spec.d()];
            t[axis] = tau;
            let full = model.variogram(&t);
            prop_assert!((model.axis_variogram(axis, tau) - full).abs() <= 1e-11 * model.variance());
        }
    }

    #[test]
    fn spectral_density_matches_resolvent(spec in spec_strategy(), raw in prop::collection::vec(-6.0f64..6.0, 3)) {
        let omega = &raw[..spec.d()];
        let reference = resolvent_density(&spec, omega);
        let got = spectral_density(&spec, omega).unwrap();
        prop_assert!((got - reference).abs() <= 1e-9 * reference, "{got} vs {reference}");
    }
}

#[test]
fn autocovariance_matches_quadrature_on_mixed_specs() {
    let specs = [
        CarmaSpec::real(&[1.3], &[&[-0.7]], 1.0).unwrap(),
        CarmaSpec::real(&[4.894, -1.1432], &[&[-1.7776, -2.0948], &[-1.3057, -2.5142]], 1.0).unwrap(),
        CarmaSpec::new(
            vec![1.0, 0.4],
            vec![
                vec![Complex64::new(-0.5, 1.5), Complex64::new(-0.5, -1.5)],
                vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)],
            ],
            0.7,
        )
        .unwrap(),
        CarmaSpec::real(&[1.0, 0.5, 0.2], &[&[-0.6, -1.2, -2.0], &[-0.9, -1.5, -2.6], &[-0.4, -1.1, -3.0]], 1.5)
            .unwrap(),
    ];
    for spec in &specs {
        let model = CovarianceModel::new(spec).unwrap();
        let d = spec.d();
        let (var, _) = autocovariance_oracle(spec, &vec![0.0; d]);
        assert!((model.variance() - var).abs() < 1e-10 * var);
        for k in 0..6 {
            let t: Vec<f64> = (0..d).map(|i| 0.37 * (k as f64 - 2.5) * (1.0 + 0.3 * i as f64)).collect();
            let (reference, _) = autocovariance_oracle(spec, &t);
            let got = model.autocovariance(&t);
            assert!((got - reference).abs() < 1e-9 * var, "{t:?}: {got} vs {reference}");
        }
    }
}

#[test]
fn explicit_planar_variogram_on_the_fitted_parameters() {
    let (b0, b1) = (4.8940, -1.1432);
    let l = [-1.7776, -2.0948, -1.3057, -2.5142];
    let spec = CarmaSpec::real(&[b0, b1], &[&[l[0], l[1]], &[l[2], l[3]]], 1.0).unwrap();
    let model = CovarianceModel::new(&spec).unwrap();
    for &t in &[[0.3, 0.7], [-0.3, 0.7], [1.5, -2.0], [0.0, 1.0], [2.0, 0.0]] {
        let reference = carma21_variogram_explicit(b0, b1, l, 1.0, t);
        assert!((model.variogram(&t) - reference).abs() < 1e-12 * reference);
    }
}

#[test]
fn companion_matrix_eigenvalues_round_trip() {
    let roots = [Complex64::new(-0.5, 1.5), Complex64::new(-0.5, -1.5), Complex64::new(-2.0, 0.0)];
    let a = companion(&roots);
    let mut eigs: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    for (e, r) in eigs.iter().zip(&roots) {
        assert!((e - r).norm() < 1e-12);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(
        CarmaSpec::real(&[1.0], &[&[-1.0, -1.0]], 1.0),
        Err(Error::DuplicateEigenvalue { .. })
    ));
    assert!(CarmaSpec::real(&[1.0], &[&[0.5]], 1.0).is_err());
    assert!(CarmaSpec::real(&[1.0, 1.0], &[&[-1.0]], 1.0).is_err());
    assert!(CarmaSpec::real(&[1.0], &[&[-1.0]], -1.0).is_err());
    assert!(matches!(
        CarmaSpec::new(vec![1.0], vec![vec![Complex64::new(-1.0, 1.0), Complex64::new(-1.0, 0.5)]], 1.0),
        Err(Error::NonConjugateSet { .. })
    ));
}
