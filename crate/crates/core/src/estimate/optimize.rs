//! Box-constrained derivative-free minimizers: differential evolution for the
//! global search and Nelder-Mead for the local polish.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulate::replication_rng;

/// Closed box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len()
            || self
                .lower
                .iter()
                .zip(&self.upper)
                .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(Error::InvalidInput("invalid parameter bounds".into()));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// DE/rand/1/bin settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    /// Population size; `None` means ten times the dimension.
    pub population: Option<usize>,
    pub generations: usize,
    pub crossover: f64,
    pub differential_weight: f64,
    /// Stop once the population's objective spread falls below
    /// `tolerance * |mean|`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: None,
            generations: 300,
            crossover: 0.9,
            differential_weight: 0.8,
            tolerance: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub generations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each generation.
    pub trace: Vec<f64>,
}

/// Minimizes `f` over `bounds`. Candidates of one generation are drawn serially
/// from a seeded stream and evaluated in parallel, so the result does not
/// depend on the thread count.
pub fn differential_evolution<F>(f: &F, bounds: &Bounds, config: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    bounds.validate()?;
    let dim = bounds.dim();
    let size = config.population.unwrap_or(10 * dim).max(4);
    let mut rng = replication_rng(config.seed, u64::MAX);

    let mut population: Vec<Vec<f64>> = (0..size)
        .map(|_| {
            (0..dim)
                .map(|k| bounds.lower[k] + (bounds.upper[k] - bounds.lower[k]) * rng.random::<f64>())
                .collect()
        })
        .collect();
    let mut fitness: Vec<f64> = population.par_iter().map(|x| sanitize(f(x))).collect();
    let mut evaluations = size;
    let mut trace = Vec::with_capacity(config.generations);
    let mut converged = false;
    let mut generations = 0;

    for _ in 0..config.generations {
        generations += 1;
        let trials: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                let (r1, r2, r3) = distinct_three(size, i, &mut rng);
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|k| {
                        let cross = rng.random::<f64>() < config.crossover || k == forced;
                        if !cross {
                            return population[i][k];
                        }
                        let v = population[r1][k]
                            + config.differential_weight * (population[r2][k] - population[r3][k]);
                        let (lo, hi) = (bounds.lower[k], bounds.upper[k]);
                        if v < lo || v > hi {
                            lo + (hi - lo) * rng.random::<f64>()
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let values: Vec<f64> = trials.par_iter().map(|x| sanitize(f(x))).collect();
        evaluations += size;
        for (i, (trial, value)) in trials.into_iter().zip(values).enumerate() {
            if value <= fitness[i] {
                population[i] = trial;
                fitness[i] = value;
            }
        }
        trace.push(fitness.iter().copied().fold(f64::INFINITY, f64::min));
        if spread_converged(&fitness, config.tolerance) {
            converged = true;
            break;
        }
    }

    let best = (0..size)
        .min_by(|&a, &b| fitness[a].total_cmp(&fitness[b]))
        .expect("non-empty population");
    Ok(DeResult {
        x: population[best].clone(),
        value: fitness[best],
        generations,
        evaluations,
        converged,
        trace,
    })
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn distinct_three<R: Rng>(size: usize, exclude: usize, rng: &mut R) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let r = rng.random_range(0..size);
        if r != exclude && !taken.contains(&r) {
            return r;
        }
    };
    let a = pick(&[]);
    let b = pick(&[a]);
    let c = pick(&[a, b]);
    (a, b, c)
}

fn spread_converged(fitness: &[f64], tolerance: f64) -> bool {
    if fitness.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let n = fitness.len() as f64;
    let mean = fitness.iter().sum::<f64>() / n;
    let std = (fitness.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    std <= tolerance * mean.abs()
}

/// Nelder-Mead settings.
#[derive(Debug, Clone, PartialEq)]
pub struct NmConfig {
    /// Relative tolerance on the spread of objective values over the simplex.
    pub rtol: f64,
    /// Relative tolerance on the simplex diameter.
    pub xtol: f64,
    pub max_evaluations: usize,
    /// Fresh simplices built around the current best after convergence.
    pub restarts: usize,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            xtol: 1e-10,
            max_evaluations: 20_000,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead from `x0`, with every vertex projected onto `bounds`.
pub fn nelder_mead<F>(f: &F, x0: &[f64], bounds: &Bounds, config: &NmConfig) -> Result<NmResult>
where
    F: Fn(&[f64]) -> f64,
{
    bounds.validate()?;
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut value = sanitize(f(&x));
    let mut evaluations = 1;
    let mut converged = false;
    for round in 0..=config.restarts {
        let budget = config.max_evaluations.saturating_sub(evaluations);
        if budget == 0 {
            break;
        }
        let run = simplex_search(f, &x, value, bounds, config, budget);
        evaluations += run.evaluations;
        let improved = run.value < value - config.rtol * value.abs();
        if run.value <= value {
            x = run.x;
            value = run.value;
        }
        converged = run.converged;
        if round > 0 && !improved {
            break;
        }
    }
    Ok(NmResult {
        x,
        value,
        evaluations,
        converged,
    })
}

fn simplex_search<F>(f: &F, x0: &[f64], f0: f64, bounds: &Bounds, config: &NmConfig, budget: usize) -> NmResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0;
    let eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        sanitize(f(x))
    };
    let mut simplex = vec![x0.to_vec()];
    let mut values = vec![f0];
    for k in 0..n {
        let mut v = x0.to_vec();
        let width = bounds.upper[k] - bounds.lower[k];
        let step = if x0[k] != 0.0 { 0.05 * x0[k].abs() } else { 2.5e-4 * width.max(1.0) };
        v[k] += step;
        if v[k] > bounds.upper[k] {
            v[k] = x0[k] - step;
        }
        bounds.clamp(&mut v);
        values.push(eval(&v, &mut evaluations));
        simplex.push(v);
    }

    let mut converged = false;
    while evaluations < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let f_spread = values.iter().map(|v| (v - best).abs()).fold(0.0, f64::max);
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())))
            .fold(0.0, f64::max);
        if best.is_finite() && (f_spread <= config.rtol * best.abs() || x_spread <= config.xtol) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect();
            bounds.clamp(&mut p);
            p
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(-0.5);
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let mut v: Vec<f64> = (0..n).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
            bounds.clamp(&mut v);
            values[i] = eval(&v, &mut evaluations);
            simplex[i] = v;
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NmResult {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn de_finds_global_basin() {
        let bounds = Bounds {
            lower: vec![-5.0, -5.0],
            upper: vec![5.0, 5.0],
        };
        // Rastrigin-like: many local minima, global at (1, -2)
        let f = |x: &[f64]| {
            let (a, b) = (x[0] - 1.0, x[1] + 2.0);
            a * a + b * b + 3.0 * (2.0 - (6.0 * a).cos() - (6.0 * b).cos())
        };
        let res = differential_evolution(&f, &bounds, &DeConfig { seed: 4, tolerance: 0.0, ..Default::default() }).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-3 && (res.x[1] + 2.0).abs() < 1e-3, "{:?}", res.x);
        let again = differential_evolution(&f, &bounds, &DeConfig { seed: 4, tolerance: 0.0, ..Default::default() }).unwrap();
        assert_eq!(res, again);
    }

    #[test]
    fn nelder_mead_polishes_rosenbrock() {
        let bounds = Bounds {
            lower: vec![-3.0, -3.0],
            upper: vec![3.0, 3.0],
        };
        let res = nelder_mead(&rosenbrock, &[-1.2, 1.0], &bounds, &NmConfig::default()).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-6 && (res.x[1] - 1.0).abs() < 1e-6, "{:?}", res);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let bounds = Bounds {
            lower: vec![2.0, -3.0],
            upper: vec![3.0, 3.0],
        };
        let res = nelder_mead(&rosenbrock, &[2.5, 1.0], &bounds, &NmConfig::default()).unwrap();
        assert!(bounds.contains(&res.x));
        assert!((res.x[0] - 2.0).abs() < 1e-6 && (res.x[1] - 4.0f64.min(3.0)).abs() < 1e-4, "{:?}", res.x);
    }
}
