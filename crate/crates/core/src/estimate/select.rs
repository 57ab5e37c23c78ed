use super::fit::FitResult;
use crate::error::{Error, Result};

/// Orders fits by increasing AIC, ties broken by fewer parameters. All fits
/// must share one lag set.
pub fn model_select(fits: &[FitResult]) -> Result<Vec<FitResult>> {
    let Some(first) = fits.first() else {
        return Err(Error::InvalidInput("no fits to compare".into()));
    };
    if fits.iter().any(|f| f.lags != first.lags) {
        return Err(Error::MixedLagSets);
    }
    let mut ranked = fits.to_vec();
    ranked.sort_by(|a, b| {
        a.aic
            .total_cmp(&b.aic)
            .then(a.parameter_count().cmp(&b.parameter_count()))
    });
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{axis_lags, FitDiagnostics, ModelStructure};

    fn dummy(p: usize, q: usize, aic: f64, per_axis: usize) -> FitResult {
        let structure = ModelStructure::new(2, p, q, 1.0).unwrap();
        let count = structure.parameter_count();
        FitResult {
            structure,
            theta: vec![0.0; count],
            wss: 0.0,
            aic,
            lags: axis_lags(2, per_axis),
            weights: vec![1.0; 2 * per_axis],
            delta: vec![0.1, 0.1],
            n: vec![10, 10],
            sigma: None,
            diagnostics: FitDiagnostics {
                de_generations: 0,
                de_evaluations: 0,
                de_converged: true,
                de_value: 0.0,
                polish_evaluations: 0,
                polish_converged: true,
                trace: vec![],
                unverified_lags: false,
            },
        }
    }

    #[test]
    fn ranks_by_aic_then_size() {
        let fits = [dummy(2, 1, -816.3761, 50), dummy(1, 0, -712.0453, 50), dummy(3, 1, -839.1583, 50)];
        let ranked = model_select(&fits).unwrap();
        let labels: Vec<String> = ranked.iter().map(|f| f.structure.label()).collect();
        assert_eq!(labels, ["CARMA(3,1)", "CARMA(2,1)", "CAR(1)"]);
        let tied = model_select(&[dummy(2, 1, -5.0, 50), dummy(1, 0, -5.0, 50)]).unwrap();
        assert_eq!(tied[0].structure.label(), "CAR(1)");
        assert_eq!(model_select(&fits[..1]).unwrap(), fits[..1].to_vec());
    }

    #[test]
    fn mixed_lag_sets_rejected() {
        assert!(matches!(
            model_select(&[dummy(1, 0, 1.0, 50), dummy(2, 1, 0.0, 25)]),
            Err(Error::MixedLagSets)
        ));
    }
}
