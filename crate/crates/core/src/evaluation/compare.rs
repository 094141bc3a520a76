use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{cv_lpds, fit_estimator, lpds, EstimatorSpec};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const REPORT_HEADER: &str = "estimator,mean_lpds,sd_lpds,mean_seconds,n,d,B,seed";

/// How one replication is scored.
#[derive(Debug, Clone)]
pub enum Protocol {
    /// Fit on `train`, score on `test`.
    Holdout { train: DataMatrix, test: DataMatrix },
    /// B-fold cross-validation on `data`.
    CrossValidated { data: DataMatrix, folds: usize },
}

impl Protocol {
    fn shape(&self) -> (usize, usize, usize) {
        match self {
            Protocol::Holdout { train, .. } => (train.nrows(), train.ncols(), 0),
            Protocol::CrossValidated { data, folds } => (data.nrows(), data.ncols(), *folds),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub protocol: Protocol,
    pub seed: u64,
}

/// Scores of one estimator across replications; `NaN` marks a failed
/// replication, described in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: String,
    pub scores: Vec<f64>,
    pub seconds: Vec<f64>,
    pub failures: Vec<(usize, String)>,
    pub n: usize,
    pub d: usize,
    pub folds: usize,
    pub seed: u64,
}

fn finite(v: &[f64]) -> Vec<f64> {
    v.iter().copied().filter(|x| x.is_finite()).collect()
}

impl ReportRow {
    pub fn mean_lpds(&self) -> f64 {
        let v = finite(&self.scores);
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Sample standard deviation over successful replications; zero for a
    /// single one.
    pub fn sd_lpds(&self) -> f64 {
        let v = finite(&self.scores);
        if v.len() < 2 {
            return if v.is_empty() { f64::NAN } else { 0.0 };
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    pub fn mean_seconds(&self) -> f64 {
        self.seconds.iter().sum::<f64>() / self.seconds.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub replications: usize,
}

impl ComparisonReport {
    pub fn row(&self, estimator: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.estimator.eq_ignore_ascii_case(estimator))
    }
}

/// Fit and score every spec on every replication. Specs share each
/// replication's seed so that they see identical folds; failures are
/// recorded per row rather than aborting the run.
pub fn run_comparison(reps: &[Replication], specs: &[EstimatorSpec], seed: u64) -> Result<ComparisonReport> {
    if specs.is_empty() {
        return Err(Error::Usage("no estimators to compare".into()));
    }
    if reps.is_empty() {
        return Err(Error::Usage("no replications to run".into()));
    }
    let (n, d, folds) = reps[0].protocol.shape();
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut row = ReportRow {
            estimator: spec.id.to_string(),
            scores: Vec::with_capacity(reps.len()),
            seconds: Vec::with_capacity(reps.len()),
            failures: Vec::new(),
            n,
            d,
            folds,
            seed,
        };
        for (r, rep) in reps.iter().enumerate() {
            let start = Instant::now();
            let outcome = match &rep.protocol {
                Protocol::Holdout { train, test } => {
                    fit_estimator(train, spec, None, derive_seed(rep.seed, &[7])).and_then(|m| lpds(&m, test))
                }
                Protocol::CrossValidated { data, folds } => cv_lpds(data, spec, *folds, rep.seed).and_then(|rep| {
                    if rep.is_partial() {
                        Err(Error::fit(
                            format!("{} of {} folds failed: {}", rep.failed_folds.len(), rep.folds, rep.failed_folds[0].1),
                            rep.fold_scores.clone(),
                        ))
                    } else {
                        Ok(rep.lpds)
                    }
                }),
            };
            row.seconds.push(start.elapsed().as_secs_f64());
            match outcome {
                Ok(v) => row.scores.push(v),
                Err(e) => {
                    row.scores.push(f64::NAN);
                    row.failures.push((r, e.to_string()));
                }
            }
        }
        rows.push(row);
    }
    Ok(ComparisonReport {
        rows,
        replications: reps.len(),
    })
}

/// CSV with [`REPORT_HEADER`]. With `timing = false` the seconds column is
/// written as 0 so that the file depends only on the inputs and seed.
pub fn write_report_csv<W: Write>(report: &ComparisonReport, timing: bool, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in &report.rows {
        let secs = if timing { r.mean_seconds() } else { 0.0 };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.estimator,
            r.mean_lpds(),
            r.sd_lpds(),
            secs,
            r.n,
            r.d,
            r.folds,
            r.seed
        )?;
    }
    Ok(())
}
