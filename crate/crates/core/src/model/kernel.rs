use num_complex::Complex64;

use super::companion::monic_from_roots;
use super::spec::CarmaSpec;
use crate::error::{Error, Result};

/// Vandermonde diagonalization of one companion matrix.
#[derive(Debug, Clone)]
pub(crate) struct AxisBasis {
    pub eigenvalues: Vec<Complex64>,
    /// `v[r][k] = lambda_k^r`
    pub v: Vec<Vec<Complex64>>,
    /// Rows of the inverse Vandermonde matrix; row `k` holds the coefficients of the
    /// Lagrange polynomial that is one at `lambda_k` and zero at the others.
    pub v_inv: Vec<Vec<Complex64>>,
}

impl AxisBasis {
    pub fn new(eigenvalues: &[Complex64], axis: usize, max_condition: f64) -> Result<Self> {
        let p = eigenvalues.len();
        let v: Vec<Vec<Complex64>> = (0..p)
            .map(|r| eigenvalues.iter().map(|l| l.powu(r as u32)).collect())
            .collect();
        let mut v_inv = Vec::with_capacity(p);
        for (k, &lk) in eigenvalues.iter().enumerate() {
            let others: Vec<Complex64> = eigenvalues
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &l)| l)
                .collect();
            let denom: Complex64 = others.iter().map(|&l| lk - l).product();
            let mut row: Vec<Complex64> = monic_from_roots(&others)
                .into_iter()
                .rev()
                .map(|c| c / denom)
                .collect();
            row.resize(p, Complex64::new(0.0, 0.0));
            v_inv.push(row);
        }
        let frob = |m: &Vec<Vec<Complex64>>| m.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let condition = frob(&v) * frob(&v_inv);
        if !condition.is_finite() || condition > max_condition {
            return Err(Error::IllConditionedVandermonde { axis, condition });
        }
        Ok(Self {
            eigenvalues: eigenvalues.to_vec(),
            v,
            v_inv,
        })
    }

    fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `row * exp(A s)` for a complex row vector.
    fn apply_exp(&self, row: &[Complex64], s: f64) -> Vec<Complex64> {
        let p = self.p();
        let scaled: Vec<Complex64> = (0..p)
            .map(|k| {
                let rv: Complex64 = (0..p).map(|r| row[r] * self.v[r][k]).sum();
                rv * (self.eigenvalues[k] * s).exp()
            })
            .collect();
        (0..p)
            .map(|c| (0..p).map(|k| scaled[k] * self.v_inv[k][c]).sum())
            .collect()
    }
}

/// Eigen-expansion coefficients of the kernel: one complex weight per tuple
/// of eigenvalue indices, one index per axis.
///
/// Entries are stored row-major with the first axis varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoefficients {
    p: usize,
    eigenvalues: Vec<Vec<Complex64>>,
    entries: Vec<Complex64>,
}

impl KernelCoefficients {
    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn eigenvalues(&self) -> &[Vec<Complex64>] {
        &self.eigenvalues
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        self.entries[self.flat_index(index)]
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &k| acc * self.p + k)
    }

    pub fn index_tuple(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.d()];
        for slot in out.iter_mut().rev() {
            *slot = flat % self.p;
            flat /= self.p;
        }
        out
    }

    /// Iterates `(index tuple, coefficient)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, Complex64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(|(flat, &c)| (self.index_tuple(flat), c))
    }

    /// Sum of all coefficients; real for conjugate-closed eigenvalue sets.
    pub fn total(&self) -> Complex64 {
        self.entries.iter().sum()
    }

    /// Kernel value from the expansion, before discarding the imaginary part.
    pub fn eval_complex(&self, s: &[f64]) -> Complex64 {
        if s.iter().any(|&x| x < 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let factors: Vec<Vec<Complex64>> = self
            .eigenvalues
            .iter()
            .zip(s)
            .map(|(eigs, &x)| eigs.iter().map(|l| (l * x).exp()).collect())
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (flat, &c) in self.entries.iter().enumerate() {
            let mut term = c;
            let mut rest = flat;
            for axis in (0..self.d()).rev() {
                term *= factors[axis][rest % self.p];
                rest /= self.p;
            }
            total += term;
        }
        total
    }

    /// Kernel value from the expansion.
    pub fn eval(&self, s: &[f64]) -> f64 {
        self.eval_complex(s).re
    }
}

/// Kernel `g(s) = b^T exp(A_1 s_1) ... exp(A_d s_d) e_p` on the positive orthant,
/// zero elsewhere.
#[derive(Debug, Clone)]
pub struct Kernel {
    b: Vec<f64>,
    bases: Vec<AxisBasis>,
    coefficients: KernelCoefficients,
}

impl Kernel {
    pub fn new(spec: &CarmaSpec) -> Result<Self> {
        let max_condition = spec.tolerances().max_vandermonde_condition;
        let bases = spec
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(axis, eigs)| AxisBasis::new(eigs, axis, max_condition))
            .collect::<Result<Vec<_>>>()?;
        let coefficients = project(spec.b(), &bases);
        Ok(Self {
            b: spec.b().to_vec(),
            bases,
            coefficients,
        })
    }

    pub fn d(&self) -> usize {
        self.bases.len()
    }

    pub fn coefficients(&self) -> &KernelCoefficients {
        &self.coefficients
    }

    /// Evaluates through the matrix exponentials.
    pub fn eval(&self, s: &[f64]) -> f64 {
        assert_eq!(s.len(), self.d(), "point dimension mismatch");
        if s.iter().any(|&x| x < 0.0) {
            return 0.0;
        }
        let mut row: Vec<Complex64> = self.b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for (basis, &x) in self.bases.iter().zip(s) {
            row = basis.apply_exp(&row, x);
        }
        row[row.len() - 1].re
    }
}

/// Builds `b^T P_1^{(k_1)} ... P_d^{(k_d)} e_p` for every index tuple, where each
/// projector factors as `v_k w_k^T`.
fn project(b: &[f64], bases: &[AxisBasis]) -> KernelCoefficients {
    let d = bases.len();
    let p = b.len();
    let head: Vec<Complex64> = (0..p)
        .map(|k| (0..p).map(|r| bases[0].v[r][k] * b[r]).sum())
        .collect();
    // links[i][k][m] = w_{i,k} . v_{i+1,m}
    let links: Vec<Vec<Vec<Complex64>>> = (0..d.saturating_sub(1))
        .map(|i| {
            (0..p)
                .map(|k| {
                    (0..p)
                        .map(|m| (0..p).map(|r| bases[i].v_inv[k][r] * bases[i + 1].v[r][m]).sum())
                        .collect()
                })
                .collect()
        })
        .collect();
    let tail: Vec<Complex64> = (0..p).map(|k| bases[d - 1].v_inv[k][p - 1]).collect();

    let total = p.pow(d as u32);
    let mut entries = Vec::with_capacity(total);
    let mut index = vec![0usize; d];
    for _ in 0..total {
        let mut c = head[index[0]];
        for i in 0..d - 1 {
            c *= links[i][index[i]][index[i + 1]];
        }
        c *= tail[index[d - 1]];
        entries.push(c);
        for slot in index.iter_mut().rev() {
            *slot += 1;
            if *slot < p {
                break;
            }
            *slot = 0;
        }
    }
    KernelCoefficients {
        p,
        eigenvalues: bases.iter().map(|b| b.eigenvalues.clone()).collect(),
        entries,
    }
}

/// Allocation-free kernel evaluation from the eigen-expansion, for hot loops.
///
/// Uses real arithmetic when every eigenvalue is real.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    d: usize,
    p: usize,
    real: bool,
    eig_re: Vec<f64>,
    coef_re: Vec<f64>,
    eig: Vec<Complex64>,
    coef: Vec<Complex64>,
}

const STACK_FACTORS: usize = 64;

impl KernelEvaluator {
    pub fn new(coef: &KernelCoefficients) -> Self {
        let eig: Vec<Complex64> = coef.eigenvalues().iter().flatten().copied().collect();
        let real = eig.iter().all(|l| l.im == 0.0);
        Self {
            d: coef.d(),
            p: coef.p(),
            real,
            eig_re: eig.iter().map(|l| l.re).collect(),
            coef_re: coef.entries().iter().map(|c| c.re).collect(),
            eig,
            coef: coef.entries().to_vec(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        debug_assert_eq!(s.len(), self.d);
        if s.iter().any(|&x| x < 0.0) {
            return 0.0;
        }
        let n = self.d * self.p;
        if n > STACK_FACTORS {
            return self.eval_heap(s);
        }
        if self.real {
            let mut f = [0.0f64; STACK_FACTORS];
            for i in 0..self.d {
                for k in 0..self.p {
                    f[i * self.p + k] = (self.eig_re[i * self.p + k] * s[i]).exp();
                }
            }
            let mut total = 0.0;
            for (flat, &c) in self.coef_re.iter().enumerate() {
                let mut term = c;
                let mut rest = flat;
                for i in (0..self.d).rev() {
                    term *= f[i * self.p + rest % self.p];
                    rest /= self.p;
                }
                total += term;
            }
            total
        } else {
            let mut f = [Complex64::new(0.0, 0.0); STACK_FACTORS];
            for i in 0..self.d {
                for k in 0..self.p {
                    f[i * self.p + k] = (self.eig[i * self.p + k] * s[i]).exp();
                }
            }
            self.sum_complex(&f[..n])
        }
    }

    fn eval_heap(&self, s: &[f64]) -> f64 {
        let f: Vec<Complex64> = (0..self.d * self.p)
            .map(|j| (self.eig[j] * s[j / self.p]).exp())
            .collect();
        self.sum_complex(&f)
    }

    fn sum_complex(&self, f: &[Complex64]) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (flat, &c) in self.coef.iter().enumerate() {
            let mut term = c;
            let mut rest = flat;
            for i in (0..self.d).rev() {
                term *= f[i * self.p + rest % self.p];
                rest /= self.p;
            }
            total += term;
        }
        total.re
    }
}

/// Kernel value at `s`.
pub fn kernel_eval(spec: &CarmaSpec, s: &[f64]) -> Result<f64> {
    check_dim(spec, s)?;
    Ok(Kernel::new(spec)?.eval(s))
}

pub fn kernel_coefficients(spec: &CarmaSpec) -> Result<KernelCoefficients> {
    Ok(Kernel::new(spec)?.coefficients)
}

pub(crate) fn check_dim(spec: &CarmaSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.d() {
        return Err(Error::InvalidInput(format!(
            "expected a point in dimension {}, got {}",
            spec.d(),
            x.len()
        )));
    }
    Ok(())
}
