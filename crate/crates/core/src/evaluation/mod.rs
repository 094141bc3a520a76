//! Log predictive density scores, cross-validation, the simulation design
//! and the estimator comparison harness.

mod compare;
mod estimator;
pub mod folds;
mod simulate;

pub use compare::{run_comparison, write_report_csv, ComparisonReport, Protocol, Replication, ReportRow, REPORT_HEADER};
pub use estimator::{fit_estimator, fit_estimator_traced, resolve_marginal_classes, EstimatorId, EstimatorSpec, FittedEstimator, MarginalPlan};
pub use folds::{complement, fold_partition};
pub use simulate::{simulate_dgp, simulate_motivating, Dgp};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::marginals::MarginalSelection;
use crate::seed::derive_seed;

/// Anything that can be scored on held-out points.
pub trait Density: Sync {
    fn log_density(&self, y: &[f64]) -> Result<f64>;
}

impl<D: Density + ?Sized> Density for &D {
    fn log_density(&self, y: &[f64]) -> Result<f64> {
        (**self).log_density(y)
    }
}

/// `-ln p̂(y_i)` for every row, in row order.
pub fn neg_log_densities<D: Density + ?Sized>(density: &D, test: &DataMatrix) -> Result<Vec<f64>> {
    (0..test.nrows())
        .into_par_iter()
        .map(|i| {
            let lp = density.log_density(test.row(i))?;
            if lp.is_finite() {
                Ok(-lp)
            } else {
                Err(Error::Numeric(format!("log density at test row {} is {lp}", i + 1)))
            }
        })
        .collect()
}

/// Mean negative log density over the rows of `test`.
pub fn lpds<D: Density + ?Sized>(density: &D, test: &DataMatrix) -> Result<f64> {
    if test.nrows() == 0 {
        return Err(Error::Data("test set is empty".into()));
    }
    let v = neg_log_densities(density, test)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Result of B-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Pooled score over every held-out row.
    pub lpds: f64,
    pub fold_scores: Vec<f64>,
    /// Folds whose fit or scoring failed, with the error text.
    pub failed_folds: Vec<(usize, String)>,
    pub folds: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginal_selection: Vec<MarginalSelection>,
}

impl CvReport {
    pub fn is_partial(&self) -> bool {
        !self.failed_folds.is_empty()
    }
}

/// Cross-validated LPDS with a caller-supplied fitting routine. `fit`
/// receives the training rows and a per-fold seed.
pub fn cv_lpds_with<D, F>(data: &DataMatrix, folds: usize, seed: u64, mut fit: F) -> Result<CvReport>
where
    D: Density,
    F: FnMut(&DataMatrix, u64) -> Result<D>,
{
    let n = data.nrows();
    if folds < 2 || folds > n {
        return Err(Error::Usage(format!("cannot split {n} rows into {folds} folds")));
    }
    let parts = fold_partition(n, folds, derive_seed(seed, &[3]));
    let mut per_row = vec![f64::NAN; n];
    let mut fold_scores = Vec::with_capacity(folds);
    let mut failed = Vec::new();
    for (b, test_idx) in parts.iter().enumerate() {
        let train = data.select_rows(&complement(n, test_idx));
        let test = data.select_rows(test_idx);
        let outcome = fit(&train, derive_seed(seed, &[4, b as u64])).and_then(|m| neg_log_densities(&m, &test));
        match outcome {
            Ok(v) => {
                fold_scores.push(v.iter().sum::<f64>() / v.len() as f64);
                for (&i, s) in test_idx.iter().zip(v) {
                    per_row[i] = s;
                }
            }
            Err(e) => {
                fold_scores.push(f64::NAN);
                failed.push((b, e.to_string()));
            }
        }
    }
    let scored: Vec<f64> = per_row.into_iter().filter(|v| !v.is_nan()).collect();
    let lpds = if scored.is_empty() {
        f64::NAN
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(CvReport {
        lpds,
        fold_scores,
        failed_folds: failed,
        folds,
        seed,
        marginal_selection: Vec::new(),
    })
}

/// Cross-validated LPDS of an estimator. Marginal classes are chosen once
/// on all rows; their parameters and the joint are refit on every
/// training split.
pub fn cv_lpds(data: &DataMatrix, spec: &EstimatorSpec, folds: usize, seed: u64) -> Result<CvReport> {
    let (classes, selection) = if spec.id.needs_marginals() {
        let (c, s) = resolve_marginal_classes(data, spec, derive_seed(seed, &[5]))?;
        (Some(c), s)
    } else {
        (None, Vec::new())
    };
    let mut report = cv_lpds_with(data, folds, seed, |train, s| fit_estimator(train, spec, classes.as_deref(), s))?;
    report.marginal_selection = selection;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::univariate::std_normal_ln_pdf;

    struct Flat;
    impl Density for Flat {
        fn log_density(&self, _: &[f64]) -> Result<f64> {
            Ok(-1.0)
        }
    }

    struct StdNormal;
    impl Density for StdNormal {
        fn log_density(&self, y: &[f64]) -> Result<f64> {
            Ok(y.iter().map(|&v| std_normal_ln_pdf(v)).sum())
        }
    }

    fn column(values: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constant_density_scores_one() {
        assert_eq!(lpds(&Flat, &column(&[1.0, 2.0, 3.0])).unwrap(), 1.0);
    }

    #[test]
    fn standard_normal_at_zero() {
        let v = lpds(&StdNormal, &column(&[0.0])).unwrap();
        assert!((v - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn fixed_density_cv_equals_full_lpds() {
        let data = column(&(0..37).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>());
        let full = lpds(&StdNormal, &data).unwrap();
        let cv = cv_lpds_with(&data, 5, 9, |_, _| Ok(StdNormal)).unwrap();
        assert_eq!(cv.lpds, full);
    }
}
