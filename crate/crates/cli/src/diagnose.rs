//! Exploratory summaries of a gridded field: marginal means along the first
//! two axes and a histogram of the standardized values against the standard
//! normal density.

use std::fmt::Write as _;

use carma_field::LatticeField;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub density: f64,
    /// Standard normal density at the bin center.
    pub normal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation with denominator `n`.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Means over each index of the first axis.
    pub row_means: Vec<f64>,
    /// Means over each index of the second axis.
    pub column_means: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
    pub warnings: Vec<String>,
}

impl Diagnosis {
    /// Largest gap between the histogram and the normal reference.
    pub fn sup_distance(&self) -> f64 {
        self.histogram
            .iter()
            .map(|b| (b.density - b.normal).abs())
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "count = {}", self.count);
        let _ = writeln!(s, "mean = {}", self.mean);
        let _ = writeln!(s, "std = {}", self.std);
        let _ = writeln!(s, "min = {}", self.min);
        let _ = writeln!(s, "max = {}", self.max);
        if !self.histogram.is_empty() {
            let _ = writeln!(s, "histogram_sup_distance = {}", self.sup_distance());
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }

    pub fn means_csv(values: &[f64], index: &str) -> String {
        let mut s = format!("{index},mean\n");
        for (i, m) in values.iter().enumerate() {
            let _ = writeln!(s, "{},{m}", i + 1);
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("lower,upper,density,normal_density\n");
        for b in &self.histogram {
            let _ = writeln!(s, "{},{},{},{}", b.lower, b.upper, b.density, b.normal);
        }
        s
    }
}

fn marginal_means(field: &LatticeField, axis: usize) -> Vec<f64> {
    let n = field.n();
    let stride: usize = n[axis + 1..].iter().product();
    let mut sums = vec![0.0; n[axis]];
    for (k, v) in field.values().iter().enumerate() {
        sums[(k / stride) % n[axis]] += v;
    }
    let per = (field.len() / n[axis]) as f64;
    sums.iter().map(|s| s / per).collect()
}

pub fn diagnose(field: &LatticeField, bins: usize) -> Result<Diagnosis> {
    if bins == 0 {
        return Err(CliError::Validation("histogram needs at least one bin".into()));
    }
    let values = field.values();
    let mean = field.mean();
    let std = field.variance().sqrt();
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (row_means, column_means) = if field.d() >= 2 {
        (marginal_means(field, 0), marginal_means(field, 1))
    } else {
        (Vec::new(), Vec::new())
    };
    let mut warnings = Vec::new();
    if field.d() < 2 {
        warnings.push("row and column means need at least two axes".to_string());
    }
    let mut histogram = Vec::new();
    if std > 0.0 {
        let lo = (min - mean) / std;
        let hi = (max - mean) / std;
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in values {
            let z = (v - mean) / std;
            let k = (((z - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let total = values.len() as f64;
        for (k, &c) in counts.iter().enumerate() {
            let lower = lo + k as f64 * width;
            let center = lower + 0.5 * width;
            histogram.push(HistogramBin {
                lower,
                upper: lower + width,
                density: c as f64 / (total * width),
                normal: (-0.5 * center * center).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            });
        }
    } else {
        warnings.push("zero sample variance: the histogram is degenerate".to_string());
    }
    Ok(Diagnosis {
        count: values.len(),
        mean,
        std,
        min,
        max,
        row_means,
        column_means,
        histogram,
        warnings,
    })
}
