use crate::error::{Error, Result};

/// Quadratically decreasing weights `w_j = ((0.1 (j - 1) + J - j) / (J - 1))^2`,
/// falling from 1 at `j = 1` to 0.01 at `j = J`.
pub fn weights_quadratic(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidInput("quadratic weights need at least two lags".into()));
    }
    let jm = count as f64;
    Ok((1..=count)
        .map(|j| {
            let j = j as f64;
            ((0.1 * (j - 1.0) + jm - j) / (jm - 1.0)).powi(2)
        })
        .collect())
}

/// Exponentially increasing weights `w_j = exp(j Δ)`.
pub fn weights_exponential(count: usize, delta: f64) -> Result<Vec<f64>> {
    if count < 2 || !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput("exponential weights need two lags and a positive spacing".into()));
    }
    Ok((1..=count).map(|j| (j as f64 * delta).exp()).collect())
}

/// How lag weights are assigned.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    Quadratic,
    Exponential,
    /// One weight per lag, in lag order.
    Custom(Vec<f64>),
}

impl WeightScheme {
    /// Weights for a lag list. The built-in schemes index a lag by its largest
    /// absolute component `j` and use the per-axis count `J = max j`.
    pub fn expand(&self, lags: &[Vec<i64>], delta: &[f64]) -> Result<Vec<f64>> {
        let weights = match self {
            WeightScheme::Custom(w) => {
                if w.len() != lags.len() {
                    return Err(Error::InvalidInput(format!(
                        "{} weights given for {} lags",
                        w.len(),
                        lags.len()
                    )));
                }
                w.clone()
            }
            scheme => {
                let order: Vec<usize> = lags
                    .iter()
                    .map(|lag| lag.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0))
                    .collect();
                let count = order.iter().copied().max().unwrap_or(0).max(2);
                let table = match scheme {
                    WeightScheme::Quadratic => weights_quadratic(count)?,
                    _ => {
                        let spacing = delta.iter().copied().fold(f64::NAN, f64::max);
                        weights_exponential(count, spacing)?
                    }
                };
                order
                    .iter()
                    .map(|&j| {
                        if j == 0 {
                            Err(Error::InvalidInput("the zero lag carries no information".into()))
                        } else {
                            Ok(table[j - 1])
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidInput("weights must be strictly positive".into()));
        }
        Ok(weights)
    }
}
