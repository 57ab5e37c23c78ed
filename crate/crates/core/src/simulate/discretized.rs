use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use super::compound_poisson::LatticeGrid;
use super::levy::{replication_rng, LevyBasisSpec};
use crate::error::{Error, Result};
use crate::field::{advance, LatticeField};
use crate::model::{CarmaSpec, Kernel, KernelEvaluator};

/// Default ceiling on the number of kernel-array cells `(M + 1)^d`.
pub const DEFAULT_KERNEL_BUDGET: usize = 1 << 26;

/// Truncated, discretized moving-average simulator on a fixed lattice.
///
/// The field at grid index `t` is `sum_{s in {0..M}^d} g(s Δ) Z(t - s)` with
/// i.i.d. cell increments `Z`. The convolution runs through a zero-padded FFT
/// whose kernel spectrum is computed once, so repeated replications only pay
/// for the noise transform.
pub struct DiscretizedSimulator {
    delta: Vec<f64>,
    n: Vec<usize>,
    m: usize,
    fft_len: Vec<usize>,
    kernel: Vec<f64>,
    spectrum: Vec<Complex64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for DiscretizedSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscretizedSimulator")
            .field("delta", &self.delta)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl DiscretizedSimulator {
    pub fn new(spec: &CarmaSpec, grid: &LatticeGrid, m: usize) -> Result<Self> {
        Self::with_budget(spec, grid, m, DEFAULT_KERNEL_BUDGET)
    }

    pub fn with_budget(spec: &CarmaSpec, grid: &LatticeGrid, m: usize, budget: usize) -> Result<Self> {
        grid.validate(spec.d())?;
        if m == 0 {
            return Err(Error::InvalidInput("truncation must be at least one grid step".into()));
        }
        let d = spec.d();
        let required = (m + 1)
            .checked_pow(d as u32)
            .filter(|&r| r <= budget)
            .ok_or(Error::KernelArrayOverflow {
                required: (m as f64 + 1.0).powi(d as i32).min(usize::MAX as f64) as usize,
                budget,
            })?;

        let evaluator = KernelEvaluator::new(Kernel::new(spec)?.coefficients());
        let side = vec![m + 1; d];
        let mut kernel = Vec::with_capacity(required);
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0; d];
        for _ in 0..required {
            for i in 0..d {
                point[i] = idx[i] as f64 * grid.delta[i];
            }
            kernel.push(evaluator.eval(&point));
            advance(&mut idx, &side);
        }

        let fft_len: Vec<usize> = grid.n.iter().map(|&n| fast_length(n + m + 1)).collect();
        let mut planner = FftPlanner::new();
        let forward = fft_len.iter().map(|&l| planner.plan_fft_forward(l)).collect();
        let inverse = fft_len.iter().map(|&l| planner.plan_fft_inverse(l)).collect();
        let mut sim = Self {
            delta: grid.delta.clone(),
            n: grid.n.clone(),
            m,
            fft_len,
            kernel,
            spectrum: Vec::new(),
            forward,
            inverse,
        };
        let mut buf = sim.embed(&sim.kernel, &side, None);
        sim.transform(&mut buf, false);
        sim.spectrum = buf;
        Ok(sim)
    }

    pub fn d(&self) -> usize {
        self.n.len()
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    /// Kernel samples `g(s Δ)`, `s in {0..M}^d`, row-major.
    pub fn kernel_array(&self) -> &[f64] {
        &self.kernel
    }

    /// Side lengths `N_i + M` of the noise array.
    pub fn noise_shape(&self) -> Vec<usize> {
        self.n.iter().map(|&n| n + self.m).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.delta.iter().product()
    }

    /// Draws the noise array; entry `u` carries the increment of the cell with
    /// grid index `u - M + 1` per axis.
    pub fn sample_noise<R: Rng + ?Sized>(&self, basis: &LevyBasisSpec, rng: &mut R) -> Vec<f64> {
        let mut noise = vec![0.0; self.noise_shape().iter().product()];
        basis.fill_increments(self.cell_volume(), &mut noise, rng);
        noise
    }

    /// Convolves a noise array with the kernel array and returns the `N^d` outputs.
    pub fn convolve(&self, noise: &[f64]) -> Vec<f64> {
        self.convolve_pair(noise, None).0
    }

    /// Convolves two noise arrays with one transform by packing them into the
    /// real and imaginary parts.
    pub fn convolve_pair(&self, first: &[f64], second: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
        let shape = self.noise_shape();
        assert_eq!(first.len(), shape.iter().product::<usize>(), "noise array size");
        let mut buf = self.embed(first, &shape, second);
        self.transform(&mut buf, false);
        for (x, k) in buf.iter_mut().zip(&self.spectrum) {
            *x *= k;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / self.fft_len.iter().product::<usize>() as f64;

        let d = self.d();
        let total: usize = self.n.iter().product();
        let strides = strides(&self.fft_len);
        let mut re = Vec::with_capacity(total);
        let mut im = second.map(|_| Vec::with_capacity(total));
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let flat: usize = (0..d).map(|i| (idx[i] + self.m) * strides[i]).sum();
            re.push(buf[flat].re * scale);
            if let Some(im) = im.as_mut() {
                im.push(buf[flat].im * scale);
            }
            advance(&mut idx, &self.n);
        }
        (re, im)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, basis: &LevyBasisSpec, rng: &mut R) -> LatticeField {
        let noise = self.sample_noise(basis, rng);
        self.wrap(self.convolve(&noise), basis)
    }

    /// Two independent realizations for the price of one transform; the first
    /// noise array is drawn before the second.
    pub fn simulate_pair<R: Rng + ?Sized>(
        &self,
        basis: &LevyBasisSpec,
        rng: &mut R,
    ) -> (LatticeField, LatticeField) {
        let a = self.sample_noise(basis, rng);
        let b = self.sample_noise(basis, rng);
        let (x, y) = self.convolve_pair(&a, Some(&b));
        (self.wrap(x, basis), self.wrap(y.expect("second output"), basis))
    }

    fn wrap(&self, values: Vec<f64>, basis: &LevyBasisSpec) -> LatticeField {
        let mut field = LatticeField::new(self.delta.clone(), self.n.clone(), values)
            .expect("simulator output matches its grid");
        field.provenance.insert("algorithm".into(), "truncated-discretized".into());
        field.provenance.insert("truncation_steps".into(), self.m.to_string());
        field.provenance.insert("noise".into(), basis.describe());
        field
    }

    fn embed(&self, values: &[f64], shape: &[usize], imag: Option<&[f64]>) -> Vec<Complex64> {
        let d = self.d();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len.iter().product()];
        let strides = strides(&self.fft_len);
        let mut idx = vec![0usize; d];
        for j in 0..values.len() {
            let flat: usize = (0..d).map(|i| idx[i] * strides[i]).sum();
            buf[flat] = Complex64::new(values[j], imag.map_or(0.0, |v| v[j]));
            advance(&mut idx, shape);
        }
        buf
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let d = self.d();
        let strides = strides(&self.fft_len);
        let total = buf.len();
        for axis in 0..d {
            let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
            let len = self.fft_len[axis];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            if axis == d - 1 {
                plan.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let stride = strides[axis];
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let block = stride * len;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + k * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        buf[base + k * stride] = *v;
                    }
                }
            }
        }
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Smallest integer `>= n` whose prime factors are all in {2, 3, 5, 7}.
pub(crate) fn fast_length(n: usize) -> usize {
    let mut candidate = n.max(1);
    loop {
        let mut r = candidate;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return candidate;
        }
        candidate += 1;
    }
}

/// One realization of the truncated, discretized field with truncation `m`
/// grid steps.
pub fn simulate_truncated_discretized(
    spec: &CarmaSpec,
    basis: &LevyBasisSpec,
    m: usize,
    grid: &LatticeGrid,
    seed: u64,
) -> Result<LatticeField> {
    let sim = DiscretizedSimulator::new(spec, grid, m)?;
    let mut rng = replication_rng(seed, 0);
    let mut field = sim.simulate(basis, &mut rng);
    field.provenance.insert("seed".into(), seed.to_string());
    Ok(field)
}
