//! Monte-Carlo study of the weighted least-squares estimator: repeated
//! simulation on a fine lattice, thinning, variogram estimation and fitting
//! under several lag and weight choices.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{
    axis_lags, empirical_variogram, fit, DeConfig, EmpiricalVariogram, FitConfig, ModelStructure, NmConfig,
    WeightScheme,
};
use crate::model::CarmaSpec;
use crate::simulate::{replication_rng, DiscretizedSimulator, LatticeGrid, LevyBasisSpec};

/// One estimator setting: number of lags per axis and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCase {
    pub name: String,
    pub lags_per_axis: usize,
    pub weights: WeightScheme,
}

impl StudyCase {
    pub fn new(name: &str, lags_per_axis: usize, weights: WeightScheme) -> Self {
        Self {
            name: name.to_string(),
            lags_per_axis,
            weights,
        }
    }
}

/// The four standard settings: 50 or 25 lags per axis with quadratically
/// decreasing or exponential weights.
pub fn standard_cases() -> Vec<StudyCase> {
    vec![
        StudyCase::new("case1", 50, WeightScheme::Quadratic),
        StudyCase::new("case2", 25, WeightScheme::Quadratic),
        StudyCase::new("case3", 50, WeightScheme::Exponential),
        StudyCase::new("case4", 25, WeightScheme::Exponential),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub spec: CarmaSpec,
    pub basis: LevyBasisSpec,
    /// Points per axis after thinning.
    pub n: usize,
    /// Spacing of the simulation lattice.
    pub fine_delta: f64,
    /// Every `thin`-th point per axis is kept.
    pub thin: usize,
    /// Kernel truncation in fine grid steps.
    pub truncation: usize,
    pub replications: usize,
    pub seed: u64,
    pub cases: Vec<StudyCase>,
    pub de: DeConfig,
    pub polish: NmConfig,
}

impl StudyConfig {
    /// Desk-scale defaults: 50 replications, 500 points per axis, spacing 0.02
    /// thinned by two, truncation 300, all four cases.
    pub fn desk_scale(spec: CarmaSpec, basis: LevyBasisSpec, seed: u64) -> Self {
        Self {
            spec,
            basis,
            n: 500,
            fine_delta: 0.02,
            thin: 2,
            truncation: 300,
            replications: 50,
            seed,
            cases: standard_cases(),
            de: DeConfig::default(),
            polish: NmConfig::default(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.fine_delta * self.thin as f64
    }

    pub fn structure(&self) -> ModelStructure {
        ModelStructure::from_spec(&self.spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("at least one replication is required".into()));
        }
        if self.cases.is_empty() {
            return Err(Error::InvalidInput("no estimator cases configured".into()));
        }
        if self.n == 0 || self.thin == 0 || self.truncation == 0 {
            return Err(Error::InvalidInput("grid size, thinning and truncation must be positive".into()));
        }
        if !(self.fine_delta.is_finite() && self.fine_delta > 0.0) {
            return Err(Error::InvalidInput("spacing must be positive".into()));
        }
        if (self.basis.kappa2() - self.spec.kappa2()).abs() > 1e-12 * self.spec.kappa2() {
            return Err(Error::InvalidInput("noise variance and model kappa2 differ".into()));
        }
        let max_lag = self.cases.iter().map(|c| c.lags_per_axis).max().unwrap_or(0);
        if max_lag >= self.n {
            return Err(Error::InvalidInput("lags exceed the grid".into()));
        }
        Ok(())
    }
}

/// Summary line for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub parameter: String,
    pub true_value: f64,
    pub mean: f64,
    pub bias: f64,
    /// Sample standard deviation with divisor `R - 1`.
    pub std: f64,
    /// Root mean squared error with divisor `R`.
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSummary {
    pub case: StudyCase,
    pub rows: Vec<StudyRow>,
    /// Estimates of the successful replications, in replication order.
    pub estimates: Vec<Vec<f64>>,
    /// Replications whose fit failed, with the error message.
    pub failures: Vec<(usize, String)>,
}

impl CaseSummary {
    /// CSV with columns `parameter,true_value,mean,bias,std,rmse`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "parameter,true_value,mean,bias,std,rmse")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.parameter, r.true_value, r.mean, r.bias, r.std, r.rmse)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub cases: Vec<CaseSummary>,
    pub replications: usize,
}

/// Mean, bias, standard deviation and RMSE of a sample of estimates.
pub fn summarize(names: &[String], truth: &[f64], estimates: &[Vec<f64>]) -> Vec<StudyRow> {
    let r = estimates.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = estimates.iter().map(|e| e[k]).collect();
            let mean = values.iter().sum::<f64>() / r;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            let mse = values.iter().map(|v| (v - truth[k]).powi(2)).sum::<f64>() / r;
            StudyRow {
                parameter: name.clone(),
                true_value: truth[k],
                mean,
                bias: mean - truth[k],
                std: var.sqrt(),
                rmse: mse.sqrt(),
            }
        })
        .collect()
}

/// Thinned empirical variograms of every replication, at `lags_per_axis`
/// lags on each principal axis. Replications are simulated in pairs sharing
/// one complex FFT; pair `k` draws from stream `k` of `seed`.
pub fn simulate_variograms(config: &StudyConfig, lags_per_axis: usize) -> Result<Vec<EmpiricalVariogram>> {
    config.validate()?;
    let d = config.spec.d();
    let grid = LatticeGrid::cubic(d, config.fine_delta, config.n * config.thin);
    let sim = DiscretizedSimulator::new(&config.spec, &grid, config.truncation)?;
    let lags = axis_lags(d, lags_per_axis);
    let pairs = config.replications.div_ceil(2);
    let per_pair: Vec<Result<Vec<EmpiricalVariogram>>> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = replication_rng(config.seed, k as u64);
            let second = 2 * k + 1 < config.replications;
            let (a, b) = sim.simulate_pair(&config.basis, &mut rng);
            let mut out = vec![empirical_variogram(&a.thin(config.thin)?, &lags)?];
            if second {
                out.push(empirical_variogram(&b.thin(config.thin)?, &lags)?);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(config.replications);
    for r in per_pair {
        all.extend(r?);
    }
    Ok(all)
}

/// Restricts a principal-axis variogram to its first `per_axis` lags per axis.
pub fn restrict_lags(emp: &EmpiricalVariogram, per_axis: usize) -> Result<EmpiricalVariogram> {
    let keep: Vec<usize> = (0..emp.len())
        .filter(|&j| emp.lags()[j].iter().all(|k| k.unsigned_abs() as usize <= per_axis))
        .collect();
    EmpiricalVariogram::from_ordinates(
        emp.delta().to_vec(),
        emp.n().to_vec(),
        keep.iter().map(|&j| emp.lags()[j].clone()).collect(),
        keep.iter().map(|&j| emp.ordinates()[j]).collect(),
    )
}

/// Runs every case on every replication and summarizes the estimates.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let structure = config.structure();
    let truth = structure.theta_of(&config.spec)?;
    let names = structure.parameter_names();
    let max_lags = config.cases.iter().map(|c| c.lags_per_axis).max().unwrap_or(0);
    let variograms = simulate_variograms(config, max_lags)?;

    let mut cases = Vec::with_capacity(config.cases.len());
    for case in &config.cases {
        let outcomes: Vec<Result<Vec<f64>>> = variograms
            .par_iter()
            .enumerate()
            .map(|(r, emp)| {
                let emp = restrict_lags(emp, case.lags_per_axis)?;
                let mut fc = FitConfig::new(structure.clone());
                fc.weights = case.weights.clone();
                fc.de = config.de.clone();
                fc.de.seed = config.de.seed.wrapping_add(r as u64);
                fc.polish = config.polish.clone();
                Ok(fit(&emp, &fc)?.theta)
            })
            .collect();
        let mut estimates = Vec::new();
        let mut failures = Vec::new();
        for (r, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(theta) => estimates.push(theta),
                Err(e) => failures.push((r, e.to_string())),
            }
        }
        if estimates.is_empty() {
            return Err(Error::InvalidInput(format!("every replication failed in {}", case.name)));
        }
        cases.push(CaseSummary {
            case: case.clone(),
            rows: summarize(&names, &truth, &estimates),
            estimates,
            failures,
        });
    }
    Ok(StudyReport {
        cases,
        replications: config.replications,
    })
}
