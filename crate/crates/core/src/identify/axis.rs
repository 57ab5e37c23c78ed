use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimate::canonical_order;
use crate::model::{CarmaSpec, CovarianceModel};

const HANKEL_CONDITION_LIMIT: f64 = 1e12;
const ARTIFACT_DISTANCE: f64 = 1e-6;
const IMAG_SNAP: f64 = 1e-9;

/// Variogram ordinates `psi(j Δ e_axis)`, `j = 0..values.len()`, along one
/// principal axis (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisOrdinates {
    axis: usize,
    delta: f64,
    values: Vec<f64>,
}

impl AxisOrdinates {
    pub fn new(axis: usize, delta: f64, values: Vec<f64>) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidInput(format!("spacing must be positive, got {delta}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        match values.first() {
            Some(v0) if v0.abs() <= tol => {}
            _ => return Err(Error::InvalidInput("the first ordinate must be psi(0) = 0".into())),
        }
        if values.iter().any(|&v| v < -tol) {
            return Err(Error::InvalidInput("variogram ordinates must be non-negative".into()));
        }
        Ok(Self { axis, delta, values })
    }

    /// Exact ordinates of `model` for `j = 0..=j_max`.
    pub fn from_model(model: &CovarianceModel, axis: usize, delta: f64, j_max: usize) -> Result<Self> {
        if axis >= model.d() {
            return Err(Error::InvalidInput(format!("axis {axis} out of range")));
        }
        let values = (0..=j_max)
            .map(|j| model.axis_variogram(axis, j as f64 * delta))
            .collect();
        Self::new(axis, delta, values)
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn j_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// Exact ordinates `j = 0..=j_max` on every axis.
pub fn axis_ordinates(spec: &CarmaSpec, delta: &[f64], j_max: usize) -> Result<Vec<AxisOrdinates>> {
    if delta.len() != spec.d() {
        return Err(Error::InvalidInput("one spacing per axis required".into()));
    }
    let model = CovarianceModel::new(spec)?;
    (0..spec.d())
        .map(|axis| AxisOrdinates::from_model(&model, axis, delta[axis], j_max))
        .collect()
}

/// Condition number of the scaled Hankel matrix built from `ord` for order `p`.
pub fn hankel_condition(ord: &AxisOrdinates, p: usize) -> Result<f64> {
    let (h, _) = hankel_system(ord, p)?;
    Ok(condition(&h))
}

fn hankel_system(ord: &AxisOrdinates, p: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be positive".into()));
    }
    if ord.values.len() < 2 * p + 2 {
        return Err(Error::InvalidInput(format!(
            "order {p} needs ordinates j = 0..={}, got j = 0..={}",
            2 * p + 1,
            ord.j_max()
        )));
    }
    let scale = ord.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::SingularHankel { condition: f64::INFINITY });
    }
    let psi: Vec<f64> = ord.values.iter().map(|v| v / scale).collect();
    let h = DMatrix::from_fn(p + 1, p + 1, |r, c| psi[r + c]);
    let rhs = DVector::from_fn(p + 1, |r, _| -psi[p + 1 + r]);
    Ok((h, rhs))
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Recovers the `p` eigenvalues of one axis from `psi(j Δ e_axis)`, `j = 0..=2p+1`.
///
/// The ordinates satisfy a linear recurrence whose characteristic roots are
/// `exp(λ Δ)` together with the root 1 of the constant term. The recurrence
/// coefficients solve a Hankel system; the root nearest 1 is discarded and the
/// rest are mapped back through the principal logarithm.
pub fn recover_axis_eigenvalues(ord: &AxisOrdinates, p: usize) -> Result<Vec<Complex64>> {
    let (h, rhs) = hankel_system(ord, p)?;
    let cond = condition(&h);
    if !(cond <= HANKEL_CONDITION_LIMIT) {
        return Err(Error::SingularHankel { condition: cond });
    }
    let r = h
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularHankel { condition: cond })?;

    // monic polynomial z^{p+1} + sum r_l z^l
    let degree = p + 1;
    let companion = DMatrix::from_fn(degree, degree, |i, j| {
        if j == degree - 1 {
            -r[i]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
    for z in roots.iter_mut() {
        *z = polish_root(*z, r.as_slice());
    }

    let artifact = roots
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .map(|(i, _)| i)
        .expect("at least one root");
    if (roots[artifact] - 1.0).norm() >= ARTIFACT_DISTANCE {
        return Err(Error::UnstableRoot {
            modulus: roots[artifact].norm(),
        });
    }
    roots.remove(artifact);

    let band = PI / ord.delta;
    let mut eigs: Vec<Complex64> = Vec::with_capacity(p);
    for z in roots {
        if z.norm() >= 1.0 {
            return Err(Error::UnstableRoot { modulus: z.norm() });
        }
        let lambda = z.ln() / ord.delta;
        if lambda.im.abs() >= band * (1.0 - 1e-9) {
            return Err(Error::RootOutsideBand {
                re: lambda.re,
                im: lambda.im,
            });
        }
        eigs.push(lambda);
    }
    refine(ord, &mut eigs);
    for lambda in eigs.iter_mut() {
        if lambda.im.abs() < IMAG_SNAP {
            lambda.im = 0.0;
        }
    }
    symmetrize_conjugates(&mut eigs);
    canonical_order(&mut eigs);
    Ok(eigs)
}

/// Gauss-Newton refinement of the eigenvalues and axis coefficients against
/// every available ordinate. Steps are accepted only while the residual drops,
/// so the Hankel roots are never made worse.
fn refine(ord: &AxisOrdinates, eigs: &mut [Complex64]) {
    let p = eigs.len();
    let Ok(dstar) = recover_axis_coefficients(ord, eigs) else {
        return;
    };
    let times: Vec<f64> = (1..ord.values.len()).map(|j| j as f64 * ord.delta).collect();
    let target = &ord.values[1..];
    let residual = |lam: &[Complex64], ds: &[Complex64]| -> Vec<Complex64> {
        times
            .iter()
            .zip(target)
            .map(|(&t, &psi)| {
                let model: Complex64 = lam.iter().zip(ds).map(|(l, d)| -d * crate::simulate::mse::expm1(l * t)).sum();
                model - psi
            })
            .collect()
    };
    let norm = |r: &[Complex64]| r.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut lam = eigs.to_vec();
    let mut ds = dstar;
    let mut res = residual(&lam, &ds);
    let mut current = norm(&res);
    for _ in 0..20 {
        if current == 0.0 {
            break;
        }
        let jac = DMatrix::from_fn(times.len(), 2 * p, |j, k| {
            let t = times[j];
            if k < p {
                -ds[k] * t * (lam[k] * t).exp()
            } else {
                -crate::simulate::mse::expm1(lam[k - p] * t)
            }
        });
        let rhs = DVector::from_iterator(res.len(), res.iter().map(|z| -z));
        let Ok(step) = jac.svd(true, true).solve(&rhs, 1e-15) else {
            break;
        };
        let next_lam: Vec<Complex64> = (0..p).map(|k| lam[k] + step[k]).collect();
        let next_ds: Vec<Complex64> = (0..p).map(|k| ds[k] + step[p + k]).collect();
        let next_res = residual(&next_lam, &next_ds);
        let next = norm(&next_res);
        if !(next < current) {
            break;
        }
        lam = next_lam;
        ds = next_ds;
        res = next_res;
        current = next;
    }
    if lam.iter().all(|l| l.re < 0.0 && l.re.is_finite() && l.im.is_finite()) {
        eigs.copy_from_slice(&lam);
    }
}

/// Newton steps on the monic polynomial with lower coefficients `r`, kept only
/// while they reduce the residual.
fn polish_root(mut z: Complex64, r: &[f64]) -> Complex64 {
    let eval = |z: Complex64| {
        let mut value = Complex64::new(1.0, 0.0);
        let mut deriv = Complex64::new(0.0, 0.0);
        for &c in r.iter().rev() {
            deriv = deriv * z + value;
            value = value * z + c;
        }
        (value, deriv)
    };
    let (mut value, _) = eval(z);
    for _ in 0..4 {
        let (v, dv) = eval(z);
        if dv.norm() == 0.0 {
            break;
        }
        let next = z - v / dv;
        let (nv, _) = eval(next);
        if nv.norm() < value.norm() {
            z = next;
            value = nv;
        } else {
            break;
        }
    }
    z
}

fn symmetrize_conjugates(eigs: &mut [Complex64]) {
    let n = eigs.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || eigs[i].im <= 0.0 {
            continue;
        }
        let partner = (0..n)
            .filter(|&j| !used[j] && j != i && eigs[j].im < 0.0)
            .min_by(|&a, &b| (eigs[a] - eigs[i].conj()).norm().total_cmp(&(eigs[b] - eigs[i].conj()).norm()));
        if let Some(j) = partner {
            let re = 0.5 * (eigs[i].re + eigs[j].re);
            let im = 0.5 * (eigs[i].im - eigs[j].im);
            eigs[i] = Complex64::new(re, im);
            eigs[j] = Complex64::new(re, -im);
            used[i] = true;
            used[j] = true;
        }
    }
}

/// Least-squares coefficients `d*` of `psi(τ) = sum_k d*_k (1 - exp(λ_k τ))`
/// along one axis, given its eigenvalues.
pub fn recover_axis_coefficients(ord: &AxisOrdinates, eigs: &[Complex64]) -> Result<Vec<Complex64>> {
    let rows = ord.values.len() - 1;
    if rows < eigs.len() {
        return Err(Error::InvalidInput("too few ordinates for the coefficient fit".into()));
    }
    let a = DMatrix::from_fn(rows, eigs.len(), |j, k| {
        Complex64::new(1.0, 0.0) - (eigs[k] * ((j + 1) as f64 * ord.delta)).exp()
    });
    let b = DVector::from_fn(rows, |j, _| Complex64::new(ord.values[j + 1], 0.0));
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let rank = svd.rank(1e-13 * sv.max());
    if rank < eigs.len() {
        return Err(Error::RankDeficient {
            rank,
            needed: eigs.len(),
        });
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut dstar: Vec<Complex64> = x.iter().copied().collect();
    // real eigenvalues carry real coefficients, conjugate pairs conjugate ones
    for k in 0..eigs.len() {
        if eigs[k].im == 0.0 {
            dstar[k].im = 0.0;
        } else if eigs[k].im > 0.0 {
            if let Some(j) = (0..eigs.len()).find(|&j| eigs[j] == eigs[k].conj()) {
                let avg = 0.5 * (dstar[k] + dstar[j].conj());
                dstar[k] = avg;
                dstar[j] = avg.conj();
            }
        }
    }
    Ok(dstar)
}
