use rand::Rng;
use rayon::prelude::*;

use super::levy::{poisson_count, replication_rng, LevyBasisSpec, LevyFamily};
use crate::error::{Error, Result};
use crate::field::{advance, LatticeField};
use crate::model::{CarmaSpec, Kernel, KernelEvaluator};

/// Jumps whose kernel weight `exp(lambda_max r)` falls below this are skipped.
pub const JUMP_CUTOFF: f64 = 1e-14;

/// Regular lattice `{Δ_i, 2Δ_i, ..., n_i Δ_i}` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGrid {
    pub delta: Vec<f64>,
    pub n: Vec<usize>,
}

impl LatticeGrid {
    pub fn cubic(d: usize, delta: f64, n: usize) -> Self {
        Self {
            delta: vec![delta; d],
            n: vec![n; d],
        }
    }

    pub fn d(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice points in row-major order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; self.d()];
        for _ in 0..self.len() {
            out.push(
                idx.iter()
                    .zip(&self.delta)
                    .map(|(&i, &dl)| (i + 1) as f64 * dl)
                    .collect(),
            );
            advance(&mut idx, &self.n);
        }
        out
    }

    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        if self.d() != d || self.delta.len() != d {
            return Err(Error::InvalidInput(format!(
                "grid dimension {} does not match model dimension {d}",
                self.d()
            )));
        }
        if self.n.contains(&0) || self.delta.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidInput("grid needs positive sizes and spacings".into()));
        }
        Ok(())
    }
}

/// Jump sites and heights of a compound-Poisson basis restricted to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSet {
    d: usize,
    /// `d` coordinates per jump.
    sites: Vec<f64>,
    heights: Vec<f64>,
}

impl JumpSet {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn site(&self, j: usize) -> &[f64] {
        &self.sites[j * self.d..(j + 1) * self.d]
    }

    pub fn height(&self, j: usize) -> f64 {
        self.heights[j]
    }

    /// Jumps whose sites satisfy `keep`.
    pub fn filter(&self, keep: impl Fn(&[f64]) -> bool) -> Self {
        let mut out = Self {
            d: self.d,
            sites: Vec::new(),
            heights: Vec::new(),
        };
        for j in 0..self.len() {
            if keep(self.site(j)) {
                out.sites.extend_from_slice(self.site(j));
                out.heights.push(self.heights[j]);
            }
        }
        out
    }
}

/// Draws all jumps of a compound-Poisson basis in the box `[lo, hi]`: a Poisson
/// number of uniform sites with independent heights.
pub fn sample_jumps<R: Rng + ?Sized>(
    basis: &LevyBasisSpec,
    lo: &[f64],
    hi: &[f64],
    rng: &mut R,
) -> Result<JumpSet> {
    let LevyFamily::CompoundPoisson { intensity, jumps } = basis.family() else {
        return Err(Error::InvalidInput("jump sampling needs a compound-Poisson basis".into()));
    };
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::InvalidInput("invalid sampling box".into()));
    }
    let d = lo.len();
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let count = poisson_count(intensity * volume, rng) as usize;
    let mut sites = Vec::with_capacity(count * d);
    let mut heights = Vec::with_capacity(count);
    for _ in 0..count {
        for i in 0..d {
            sites.push(lo[i] + (hi[i] - lo[i]) * rng.random::<f64>());
        }
        heights.push(jumps.sample(rng));
    }
    Ok(JumpSet { d, sites, heights })
}

/// Direct evaluation `sum_j g(t - s_j) W_j` at each point, with no cutoff.
pub fn evaluate_jump_field(kernel: &KernelEvaluator, jumps: &JumpSet, points: &[Vec<f64>]) -> Vec<f64> {
    let mut diff = vec![0.0; jumps.d];
    points
        .iter()
        .map(|t| {
            let mut total = 0.0;
            for j in 0..jumps.len() {
                let s = jumps.site(j);
                if s.iter().zip(t).any(|(si, ti)| si > ti) {
                    continue;
                }
                for i in 0..jumps.d {
                    diff[i] = t[i] - s[i];
                }
                total += kernel.eval(&diff) * jumps.heights[j];
            }
            total
        })
        .collect()
}

/// Exact realization of the field driven only by the jumps in `[-m, m]^d`,
/// on a lattice contained in that box.
pub fn simulate_compound_poisson(
    spec: &CarmaSpec,
    basis: &LevyBasisSpec,
    m: f64,
    grid: &LatticeGrid,
    seed: u64,
) -> Result<LatticeField> {
    grid.validate(spec.d())?;
    let values = simulate_compound_poisson_at(spec, basis, m, &grid.points(), seed)?;
    let mut field = LatticeField::new(grid.delta.clone(), grid.n.clone(), values)?;
    field.provenance.insert("algorithm".into(), "compound-poisson".into());
    field.provenance.insert("truncation".into(), m.to_string());
    field.provenance.insert("seed".into(), seed.to_string());
    field.provenance.insert("noise".into(), basis.describe());
    Ok(field)
}

/// Same as [`simulate_compound_poisson`] on an arbitrary finite point set.
pub fn simulate_compound_poisson_at(
    spec: &CarmaSpec,
    basis: &LevyBasisSpec,
    m: f64,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<f64>> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidInput(format!("truncation radius must be positive, got {m}")));
    }
    let d = spec.d();
    for t in points {
        if t.len() != d {
            return Err(Error::InvalidInput("point dimension mismatch".into()));
        }
        if t.iter().any(|x| x.abs() > m) {
            return Err(Error::GridOutsideTruncation {
                point: t.clone(),
                radius: m,
            });
        }
    }
    let mut rng = replication_rng(seed, 0);
    let jumps = sample_jumps(basis, &vec![-m; d], &vec![m; d], &mut rng)?;
    let kernel = KernelEvaluator::new(Kernel::new(spec)?.coefficients());
    let r_cut = JUMP_CUTOFF.ln() / spec.lambda_max();
    let index = JumpIndex::new(&jumps, m, r_cut);
    Ok(points
        .par_iter()
        .map(|t| index.evaluate(&kernel, t))
        .collect())
}

/// Jumps bucketed on a regular cell grid over `[-m, m]^d`.
struct JumpIndex {
    d: usize,
    m: f64,
    r_cut: f64,
    cells: usize,
    cell_side: f64,
    start: Vec<usize>,
    sites: Vec<f64>,
    heights: Vec<f64>,
}

impl JumpIndex {
    const MAX_CELLS: usize = 1 << 20;

    fn new(jumps: &JumpSet, m: f64, r_cut: f64) -> Self {
        let d = jumps.d;
        let per_axis_cap = (Self::MAX_CELLS as f64).powf(1.0 / d as f64).floor().max(1.0) as usize;
        let cells = ((2.0 * m / (0.5 * r_cut)).ceil() as usize).clamp(1, per_axis_cap);
        let cell_side = 2.0 * m / cells as f64;
        let total = cells.pow(d as u32);
        let cell_of = |s: &[f64]| -> usize {
            s.iter().fold(0, |acc, &x| {
                let c = (((x + m) / cell_side) as usize).min(cells - 1);
                acc * cells + c
            })
        };
        let mut start = vec![0usize; total + 1];
        let ids: Vec<usize> = (0..jumps.len()).map(|j| cell_of(jumps.site(j))).collect();
        for &c in &ids {
            start[c + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut sites = vec![0.0; jumps.sites.len()];
        let mut heights = vec![0.0; jumps.len()];
        for (j, &c) in ids.iter().enumerate() {
            let slot = fill[c];
            fill[c] += 1;
            sites[slot * d..(slot + 1) * d].copy_from_slice(jumps.site(j));
            heights[slot] = jumps.heights[j];
        }
        Self {
            d,
            m,
            r_cut,
            cells,
            cell_side,
            start,
            sites,
            heights,
        }
    }

    fn evaluate(&self, kernel: &KernelEvaluator, t: &[f64]) -> f64 {
        let d = self.d;
        let cell = |x: f64| (((x + self.m) / self.cell_side).floor().max(0.0) as usize).min(self.cells - 1);
        let lo: Vec<usize> = t.iter().map(|&x| cell(x - self.r_cut)).collect();
        let hi: Vec<usize> = t.iter().map(|&x| cell(x)).collect();
        let span: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| b - a + 1).collect();
        let mut offset = vec![0usize; d];
        let mut diff = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let flat = (0..d).fold(0, |acc, i| acc * self.cells + lo[i] + offset[i]);
            for j in self.start[flat]..self.start[flat + 1] {
                let s = &self.sites[j * d..(j + 1) * d];
                let mut inside = true;
                for i in 0..d {
                    diff[i] = t[i] - s[i];
                    if diff[i] < 0.0 || diff[i] > self.r_cut {
                        inside = false;
                        break;
                    }
                }
                if inside {
                    total += kernel.eval(&diff) * self.heights[j];
                }
            }
            if !advance(&mut offset, &span) {
                break;
            }
        }
        total
    }
}
