use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::model::CovarianceModel;

/// Matheron variogram estimates at integer lag offsets of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalVariogram {
    delta: Vec<f64>,
    n: Vec<usize>,
    lags: Vec<Vec<i64>>,
    ordinates: Vec<f64>,
    pair_counts: Vec<u64>,
}

impl EmpiricalVariogram {
    /// Wraps ordinates computed elsewhere (for instance exact model values);
    /// pair counts follow from the grid size.
    pub fn from_ordinates(delta: Vec<f64>, n: Vec<usize>, lags: Vec<Vec<i64>>, ordinates: Vec<f64>) -> Result<Self> {
        if delta.len() != n.len() || lags.len() != ordinates.len() {
            return Err(Error::InvalidInput("inconsistent variogram dimensions".into()));
        }
        let pair_counts = lags
            .iter()
            .map(|lag| pair_count(lag, &n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            delta,
            n,
            lags,
            ordinates,
            pair_counts,
        })
    }

    /// Exact model variogram at the given lags, in the same container.
    pub fn exact(model: &CovarianceModel, delta: &[f64], n: &[usize], lags: Vec<Vec<i64>>) -> Result<Self> {
        let ordinates = lags
            .iter()
            .map(|lag| model.variogram(&physical(lag, delta)))
            .collect();
        Self::from_ordinates(delta.to_vec(), n.to_vec(), lags, ordinates)
    }

    pub fn d(&self) -> usize {
        self.n.len()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    /// Lags as integer multiples of the grid spacing.
    pub fn lags(&self) -> &[Vec<i64>] {
        &self.lags
    }

    /// Lag `j` in physical units.
    pub fn lag_vector(&self, j: usize) -> Vec<f64> {
        physical(&self.lags[j], &self.delta)
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    pub fn pair_counts(&self) -> &[u64] {
        &self.pair_counts
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// CSV with columns `lag_1, ..., lag_d, ordinate, pair_count`, lags in physical units.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let head: Vec<String> = (1..=self.d()).map(|i| format!("lag_{i}")).collect();
        writeln!(w, "{},ordinate,pair_count", head.join(","))?;
        for j in 0..self.len() {
            let lag: Vec<String> = self.lag_vector(j).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{},{}", lag.join(","), self.ordinates[j], self.pair_counts[j])?;
        }
        Ok(())
    }
}

pub(crate) fn physical(lag: &[i64], delta: &[f64]) -> Vec<f64> {
    lag.iter().zip(delta).map(|(&k, &dl)| k as f64 * dl).collect()
}

fn pair_count(lag: &[i64], n: &[usize]) -> Result<u64> {
    if lag.len() != n.len() {
        return Err(Error::InvalidInput("lag dimension mismatch".into()));
    }
    let mut count = 1u64;
    for (&k, &ni) in lag.iter().zip(n) {
        if k.unsigned_abs() >= ni as u64 {
            return Err(Error::LagOutOfRange {
                lag: lag.to_vec(),
                n: n.to_vec(),
            });
        }
        count *= ni as u64 - k.unsigned_abs();
    }
    Ok(count)
}

/// Lags `j e_i` for every axis `i` and `j = 1..=per_axis`, axis by axis.
pub fn axis_lags(d: usize, per_axis: usize) -> Vec<Vec<i64>> {
    let mut lags = Vec::with_capacity(d * per_axis);
    for axis in 0..d {
        for j in 1..=per_axis {
            let mut lag = vec![0i64; d];
            lag[axis] = j as i64;
            lags.push(lag);
        }
    }
    lags
}

/// Matheron estimator: for each lag, the mean squared increment over all pairs
/// of lattice points separated by that lag.
pub fn empirical_variogram(field: &LatticeField, lags: &[Vec<i64>]) -> Result<EmpiricalVariogram> {
    let n = field.n().to_vec();
    let pair_counts = lags
        .iter()
        .map(|lag| pair_count(lag, &n))
        .collect::<Result<Vec<_>>>()?;
    let ordinates = lags
        .par_iter()
        .zip(&pair_counts)
        .map(|(lag, &count)| squared_increment_sum(field, lag) / count as f64)
        .collect();
    Ok(EmpiricalVariogram {
        delta: field.delta().to_vec(),
        n,
        lags: lags.to_vec(),
        ordinates,
        pair_counts,
    })
}

fn squared_increment_sum(field: &LatticeField, lag: &[i64]) -> f64 {
    let d = field.d();
    let n = field.n();
    let strides = field.strides();
    let values = field.values();
    // admissible base points s: 0 <= s_i, s_i + k_i < n_i
    let lo: Vec<usize> = lag.iter().map(|&k| (-k).max(0) as usize).collect();
    let hi: Vec<usize> = lag
        .iter()
        .zip(n)
        .map(|(&k, &ni)| (ni as i64 - k.max(0)) as usize)
        .collect();
    let shift: isize = lag
        .iter()
        .zip(&strides)
        .map(|(&k, &s)| k as isize * s as isize)
        .sum();
    let inner = hi[d - 1] - lo[d - 1];
    let outer_shape: Vec<usize> = (0..d - 1).map(|i| hi[i] - lo[i]).collect();
    let outer_total: usize = outer_shape.iter().product();
    let mut idx = vec![0usize; d - 1];
    let mut total = 0.0;
    for _ in 0..outer_total {
        let base: usize = (0..d - 1).map(|i| (lo[i] + idx[i]) * strides[i]).sum::<usize>() + lo[d - 1];
        let partner = (base as isize + shift) as usize;
        let a = &values[base..base + inner];
        let b = &values[partner..partner + inner];
        total += a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
        crate::field::advance(&mut idx, &outer_shape);
    }
    total
}
