//! Independent reference implementations shared by the integration tests.
//! Nothing here goes through the crate's spectral expansions: kernels come
//! from matrix exponentials of companion matrices and covariances from
//! brute-force quadrature.
#![allow(dead_code)]

use carma_field::CarmaSpec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real coefficients `c_0..c_{p-1}` of the monic polynomial with the given roots,
/// `z^p + c_{p-1} z^{p-1} + ... + c_0`.
pub fn monic_coefficients(roots: &[Complex64]) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        poly = next;
    }
    poly[..roots.len()].iter().map(|c| c.re).collect()
}

/// Companion matrix with ones on the superdiagonal and the negated
/// coefficients in the last row.
pub fn companion(roots: &[Complex64]) -> DMatrix<f64> {
    let p = roots.len();
    let c = monic_coefficients(roots);
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..p {
        a[(p - 1, j)] = -c[j];
    }
    a
}

/// Kernel `b' exp(A_1 s_1) ... exp(A_d s_d) e_p` on the positive orthant.
pub struct MatrixKernel {
    pub p: usize,
    pub b: DVector<f64>,
    pub a: Vec<DMatrix<f64>>,
}

impl MatrixKernel {
    pub fn new(spec: &CarmaSpec) -> Self {
        let p = spec.p();
        let mut b = DVector::zeros(p);
        for (i, v) in spec.b().iter().enumerate().take(p) {
            b[i] = *v;
        }
        let a = spec.eigenvalues().iter().map(|e| companion(e)).collect();
        Self { p, b, a }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        if s.iter().any(|&x| x < 0.0) {
            return 0.0;
        }
        let mut row = self.b.transpose();
        for (ai, &si) in self.a.iter().zip(s) {
            row = row * (ai * si).exp();
        }
        row[self.p - 1]
    }
}

/// Per-axis moment matrix `∫ exp(A s) ⊗ exp(A (s + τ)) ds` over
/// `s >= max(0, -τ)`, by exp-sinh quadrature on nested grids: the step is
/// halved, reusing earlier nodes, until the entries change by less than
/// `1e-13` of their size. Returns the matrix and the last change.
fn axis_moment(a: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, f64) {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (u_min, u_max) = (-4.5, 2.6);
    let lo = (-tau).max(0.0);
    let shift = (a * tau).exp();
    let p = a.nrows();
    let term = |u: f64| {
        let e = (half_pi * u.sinh()).exp();
        let at = (a * (lo + e)).exp();
        let shifted = &at * &shift;
        at.kronecker(&shifted) * (half_pi * u.cosh() * e)
    };
    let mut h = 0.25;
    let mut sum = DMatrix::zeros(p * p, p * p);
    let mut k = (u_min / h) as i64;
    while k as f64 * h <= u_max {
        sum += term(k as f64 * h);
        k += 1;
    }
    let mut prev = &sum * h;
    loop {
        h /= 2.0;
        let mut k = (u_min / h) as i64 + 1;
        while k as f64 * h <= u_max {
            sum += term(k as f64 * h);
            k += 2;
        }
        let next = &sum * h;
        let change = (&next - &prev).amax() / next.amax();
        if change < 1e-13 || h < 1.0 / 128.0 {
            return (next, change);
        }
        prev = next;
    }
}

/// `kappa2 ∫ g(s) g(s + t) ds` by iterated quadrature. The integrand is
/// `(b ⊗ b)' Π_i [exp(A_i s_i) ⊗ exp(A_i (s_i + t_i))] (e_p ⊗ e_p)`, so the
/// integral over the orthant factors into one moment matrix per axis.
/// Returns the value and the largest relative step-halving change.
pub fn autocovariance_oracle(spec: &CarmaSpec, t: &[f64]) -> (f64, f64) {
    let kernel = MatrixKernel::new(spec);
    let p = kernel.p;
    let mut row = kernel.b.kronecker(&kernel.b).transpose();
    let mut worst = 0.0f64;
    for (a, &ti) in kernel.a.iter().zip(t) {
        let (m, change) = axis_moment(a, ti);
        worst = worst.max(change);
        row = row * m;
    }
    (spec.kappa2() * row[(p - 1) * p + (p - 1)], worst)
}

/// Output of a truncated causal convolution at every grid point, by direct
/// summation: `out[t] = Σ_{s in {0..M}^d} g[s] noise[t + M - s]`.
pub fn direct_convolution(kernel: &[f64], m: usize, noise: &[f64], n: &[usize]) -> Vec<f64> {
    let d = n.len();
    let side = m + 1;
    let noise_shape: Vec<usize> = n.iter().map(|k| k + m).collect();
    let total: usize = n.iter().product();
    let mut out = vec![0.0; total];
    let mut t = vec![0usize; d];
    for slot in out.iter_mut() {
        let mut s = vec![0usize; d];
        let mut acc = 0.0;
        for &g in kernel.iter().take(side.pow(d as u32)) {
            let mut flat = 0;
            for i in 0..d {
                flat = flat * noise_shape[i] + (t[i] + m - s[i]);
            }
            acc += g * noise[flat];
            increment(&mut s, &vec![side; d]);
        }
        *slot = acc;
        increment(&mut t, n);
    }
    out
}

/// Row-major odometer step.
pub fn increment(idx: &mut [usize], shape: &[usize]) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < shape[i] {
            return;
        }
        idx[i] = 0;
    }
}

fn draw_separated<R: Rng>(rng: &mut R, count: usize, lo: f64, hi: f64, gap: f64, taken: &[f64]) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..count).map(|_| rng.random_range(lo..hi)).collect();
        let mut all: Vec<f64> = taken.to_vec();
        all.extend(&v);
        all.sort_by(f64::total_cmp);
        if all.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

/// Eigenvalues of one axis: real ones separated by at least `gap`, and
/// optionally one complex pair.
pub fn random_axis<R: Rng>(rng: &mut R, p: usize, complex: bool, gap: f64) -> Vec<Complex64> {
    let mut eigs = Vec::with_capacity(p);
    let mut reals_taken = Vec::new();
    if complex && p >= 2 {
        let re = rng.random_range(-2.5..-0.4);
        let im = rng.random_range(0.4..2.0);
        eigs.push(Complex64::new(re, im));
        eigs.push(Complex64::new(re, -im));
        reals_taken.push(re);
    }
    let reals = draw_separated(rng, p - eigs.len(), -3.0, -0.3, gap, &reals_taken);
    eigs.extend(reals.into_iter().map(|r| Complex64::new(r, 0.0)));
    eigs
}

/// Random valid spec of the given order.
pub fn random_spec<R: Rng>(rng: &mut R, d: usize, p: usize, q: usize, complex_prob: f64) -> CarmaSpec {
    loop {
        let eigenvalues: Vec<Vec<Complex64>> = (0..d)
            .map(|_| {
                let complex = rng.random::<f64>() < complex_prob;
                random_axis(rng, p, complex, 0.3)
            })
            .collect();
        let mut b: Vec<f64> = (0..=q).map(|_| rng.random_range(-2.0..2.0)).collect();
        b[0] = rng.random_range(0.5..2.5);
        if q > 0 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            b[q] = sign * rng.random_range(0.3..1.5);
        }
        let kappa2 = rng.random_range(0.5..2.0);
        if let Ok(spec) = CarmaSpec::new(b, eigenvalues, kappa2) {
            return spec;
        }
    }
}

/// Random real-eigenvalue CARMA(2,1) spec on the plane.
pub fn random_carma21<R: Rng>(rng: &mut R) -> (f64, f64, [f64; 4], f64) {
    let l1 = draw_separated(rng, 2, -3.0, -0.3, 0.3, &[]);
    let l2 = draw_separated(rng, 2, -3.0, -0.3, 0.3, &[]);
    let b0 = rng.random_range(0.5..3.0);
    let b1 = rng.random_range(-1.5..1.5);
    let kappa2 = rng.random_range(0.5..2.0);
    (b0, b1, [l1[0], l1[1], l2[0], l2[1]], kappa2)
}

/// Planar CARMA(2,1) variogram written out term by term from the explicit
/// pair weights for same-sign and opposite-sign lag components.
pub fn carma21_variogram_explicit(b0: f64, b1: f64, l: [f64; 4], kappa2: f64, t: [f64; 2]) -> f64 {
    let [l11, l12, l21, l22] = l;
    let den = |a: f64, c: f64| 4.0 * a * c * (l11 - l12) * (l11 + l12) * (l21 - l22) * (l21 + l22);
    let same = [
        (l11, l21, (l12 - l21) * (b0 + b1 * l11) * (b0 * (2.0 * l11 + l12 + l21) + b1 * l11 * (l12 - l21)) / den(l11, l21)),
        (l12, l21, -(l11 - l21) * (b0 + b1 * l12) * (b0 * (l11 + 2.0 * l12 + l21) + b1 * l12 * (l11 - l21)) / den(l12, l21)),
        (
            l11,
            l22,
            (l12 - l22) * (b0 + b1 * l11) * (b0 * (2.0 * l11 + l12 + l22) + b1 * l11 * (l12 - l22))
                / (4.0 * l11 * l22 * (l11 - l12) * (l11 + l12) * (l22 - l21) * (l21 + l22)),
        ),
        (l12, l22, (l11 - l22) * (b0 + b1 * l12) * (b0 * (l11 + 2.0 * l12 + l22) + b1 * l12 * (l11 - l22)) / den(l12, l22)),
    ];
    let opposite = [
        (l11, l21, (l12 + l21) * (b0 + b1 * l11) * (b0 * (2.0 * l11 + l12 - l21) + b1 * l11 * (l12 + l21)) / den(l11, l21)),
        (l12, l21, -(l11 + l21) * (b0 + b1 * l12) * (b0 * (l11 + 2.0 * l12 - l21) + b1 * l12 * (l11 + l21)) / den(l12, l21)),
        (l11, l22, -(l12 + l22) * (b0 + b1 * l11) * (b0 * (2.0 * l11 + l12 - l22) + b1 * l11 * (l12 + l22)) / den(l11, l22)),
        (l12, l22, (l11 + l22) * (b0 + b1 * l12) * (b0 * (l11 + 2.0 * l12 - l22) + b1 * l12 * (l11 + l22)) / den(l12, l22)),
    ];
    let terms = if t[0] * t[1] >= 0.0 { same } else { opposite };
    2.0 * kappa2
        * terms
            .iter()
            .map(|&(a, c, w)| w * (1.0 - (a * t[0].abs()).exp() * (c * t[1].abs()).exp()))
            .sum::<f64>()
}

/// Planar CARMA(2,1) variogram along the first axis, explicit form.
pub fn carma21_first_axis_explicit(b0: f64, b1: f64, l: [f64; 4], kappa2: f64, tau: f64) -> f64 {
    let [l11, l12, l21, l22] = l;
    let first = 2.0 * kappa2 * (b0 + b1 * l12) * (b0 * (l11 * l11 + 2.0 * l11 * l12 + l21 * l22) + b1 * l12 * (l11 * l11 - l21 * l22))
        / (4.0 * l12 * l21 * l22 * (l11 - l12) * (l11 + l12) * (l21 + l22));
    let second = 2.0 * kappa2 * (b0 + b1 * l11) * (b0 * (2.0 * l11 * l12 + l12 * l12 + l21 * l22) + b1 * l11 * (l12 * l12 - l21 * l22))
        / (4.0 * l11 * l21 * l22 * (l12 - l11) * (l11 + l12) * (l21 + l22));
    first * (1.0 - (l12 * tau.abs()).exp()) + second * (1.0 - (l11 * tau.abs()).exp())
}

/// Planar CARMA(2,1) variogram along the second axis, explicit form.
pub fn carma21_second_axis_explicit(b0: f64, b1: f64, l: [f64; 4], kappa2: f64, tau: f64) -> f64 {
    let [l11, l12, l21, l22] = l;
    let numerator = |m: f64| {
        b0 * b0 * (l11 * l11 + 3.0 * l11 * l12 + l12 * l12 - m * m)
            + 2.0 * b0 * b1 * l11 * l12 * (l11 + l12)
            + b1 * b1 * l11 * l12 * (l11 * l12 - m * m)
    };
    let first = 2.0 * kappa2 * numerator(l21) / (4.0 * l11 * l12 * l21 * (l11 + l12) * (l22 - l21) * (l21 + l22));
    let second = 2.0 * kappa2 * numerator(l22) / (4.0 * l11 * l12 * l22 * (l11 + l12) * (l21 - l22) * (l21 + l22));
    first * (1.0 - (l21 * tau.abs()).exp()) + second * (1.0 - (l22 * tau.abs()).exp())
}

/// Median of a sample.
pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest relative discrepancy between two specs, eigenvalues compared in
/// canonical order.
pub fn spec_distance(a: &CarmaSpec, b: &CarmaSpec) -> f64 {
    let sort = |s: &CarmaSpec| {
        s.eigenvalues()
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
                e
            })
            .collect::<Vec<_>>()
    };
    let mut worst = 0.0f64;
    for (x, y) in sort(a).iter().flatten().zip(sort(b).iter().flatten()) {
        worst = worst.max((x - y).norm() / x.norm().max(1.0));
    }
    let scale = a.b().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.b().iter().zip(b.b()) {
        worst = worst.max((x - y).abs() / scale);
    }
    worst
}
