//! Copula-type density estimators and the normal and t copula baselines.
//!
//! A copula-type model pairs marginal estimates `F_j` with a fitted mixture
//! `Ĝ` living in an X-space reached through working marginals `H_j`:
//!
//! ```text
//! f̂(y) = ĝ(x) Π_j f_j(y_j) / h_j(x_j),   x_j = H_j^{-1}(F_j(y_j))
//! ```

mod parametric;

pub use parametric::{fit_parametric_copula, CopulaKind, ParametricCopulaModel};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::marginals::{implied_marginal, MarginalModel};
use crate::numerics::{clamp_probability, Matrix, UnivariateCdf};
use crate::seed::derive_seed;
use crate::vb::{self, Family, FitOptions, MixtureModel, Priors};

/// `u_ij = F_j(y_ij)`, clamped away from 0 and 1.
pub fn to_u_space(data: &DataMatrix, marginals: &[MarginalModel]) -> Result<DataMatrix> {
    check_width(data.ncols(), marginals.len())?;
    let (n, d) = (data.nrows(), data.ncols());
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        for (j, f) in marginals.iter().enumerate() {
            let y = data.row(i)[j];
            if !y.is_finite() {
                return Err(Error::Data(format!("row {}, column {}: value {y} is not finite", i + 1, j + 1)));
            }
            out[(i, j)] = clamp_probability(f.cdf(y));
        }
    }
    DataMatrix::new(out)
}

/// `x_ij = H_j^{-1}(u_ij)`.
pub fn to_x_space(u: &DataMatrix, working: &[MarginalModel]) -> Result<DataMatrix> {
    check_width(u.ncols(), working.len())?;
    let d = u.ncols();
    let rows: Vec<Vec<f64>> = u
        .rows()
        .enumerate()
        .map(|(i, row)| {
            (0..d)
                .map(|j| {
                    let p = row[j];
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::Data(format!("row {}, column {}: u = {p} outside (0, 1)", i + 1, j + 1)));
                    }
                    working[j].quantile(p)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    DataMatrix::from_rows(&rows)
}

fn check_width(d: usize, k: usize) -> Result<()> {
    if d != k {
        return Err(Error::Usage(format!("{k} marginal models for {d} columns")));
    }
    Ok(())
}

/// Starting working marginals `H^{(0)}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialWorking {
    /// Implied marginals of the same mixture family fitted directly to Y.
    #[default]
    Implied,
    /// `H_j = Φ`.
    StandardNormal,
    Given(Vec<MarginalModel>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaOptions {
    pub family: Family,
    pub init: InitialWorking,
    pub priors: Priors,
    pub vb: FitOptions,
    pub max_iter: usize,
    /// Consecutive non-improving iterations tolerated before stopping.
    pub patience: usize,
}

impl Default for CopulaOptions {
    fn default() -> Self {
        CopulaOptions {
            family: Family::MN,
            init: InitialWorking::Implied,
            priors: Priors::default(),
            vb: FitOptions::default(),
            max_iter: 30,
            patience: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loglik: f64,
    pub k: usize,
}

/// Label used for a copula-type estimator built on `family`.
pub fn ct_label(family: Family) -> String {
    format!("CT-{family}")
}

/// Marginals `F_j`, working marginals `H_j` and the X-space mixture `Ĝ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaTypeModel {
    pub family: Family,
    pub marginals: Vec<MarginalModel>,
    pub working: Vec<MarginalModel>,
    pub joint: MixtureModel,
    /// Implied marginals `Ĝ_j` of the joint.
    pub joint_marginals: Vec<MarginalModel>,
    pub iteration_log: Vec<IterationRecord>,
    /// Iteration whose `(H, Ĝ)` pair is stored.
    pub selected_iteration: usize,
}

impl fmt::Display for CopulaTypeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} with {} components in {} dimensions",
            ct_label(self.family),
            self.joint.n_components(),
            self.dim()
        )
    }
}

impl CopulaTypeModel {
    pub fn new(marginals: Vec<MarginalModel>, working: Vec<MarginalModel>, joint: MixtureModel) -> Result<Self> {
        let d = joint.dim();
        if marginals.len() != d || working.len() != d {
            return Err(Error::Usage(format!(
                "{} marginals and {} working marginals for a {d}-variate joint",
                marginals.len(),
                working.len()
            )));
        }
        let joint_marginals = (0..d).map(|j| implied_marginal(&joint, j)).collect::<Result<_>>()?;
        Ok(CopulaTypeModel {
            family: joint.family(),
            marginals,
            working,
            joint,
            joint_marginals,
            iteration_log: Vec::new(),
            selected_iteration: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.joint.dim()
    }

    /// Stored training log-likelihood of the selected iterate.
    pub fn loglik(&self) -> Option<f64> {
        self.iteration_log
            .iter()
            .find(|r| r.iteration == self.selected_iteration)
            .map(|r| r.loglik)
    }

    fn log_density_with(&self, y: &[f64], denom: &[MarginalModel]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::Usage(format!("point has {} coordinates, model has {}", y.len(), self.dim())));
        }
        let mut x = Vec::with_capacity(y.len());
        for (j, &yj) in y.iter().enumerate() {
            if !yj.is_finite() {
                return Err(Error::Data(format!("coordinate {} is not finite", j + 1)));
            }
            x.push(denom[j].quantile(clamp_probability(self.marginals[j].cdf(yj)))?);
        }
        Ok(assemble(&self.joint, &self.marginals, denom, y, &x))
    }

    /// `ln f̂(y | H, Ĝ)`.
    pub fn logpdf(&self, y: &[f64]) -> Result<f64> {
        self.log_density_with(y, &self.working)
    }

    /// `ln[ĝ_j(x_j) / h_j(x_j) · f_j(y_j)]`, the `j`-th marginal of the
    /// estimator.
    pub fn marginal_logpdf(&self, j: usize, yj: f64) -> Result<f64> {
        if j >= self.dim() {
            return Err(Error::Usage(format!("coordinate {j} out of range")));
        }
        let u = clamp_probability(self.marginals[j].cdf(yj));
        let x = self.working[j].quantile(u)?;
        Ok(self.joint_marginals[j].ln_pdf(x) - self.working[j].ln_pdf(x) + self.marginals[j].ln_pdf(yj))
    }

    /// The exact copula variant: `h_j` replaced by `ĝ_j` and
    /// `x_j = Ĝ_j^{-1}(F_j(y_j))`, so that its marginals are the `f_j`.
    pub fn exact_copula_logpdf(&self, y: &[f64]) -> Result<f64> {
        self.log_density_with(y, &self.joint_marginals)
    }

    /// Log-density at every row, evaluated in parallel.
    pub fn logpdf_rows(&self, data: &DataMatrix) -> Result<Vec<f64>> {
        (0..data.nrows()).into_par_iter().map(|i| self.logpdf(data.row(i))).collect()
    }

    /// `Σ_i ln f̂(y_i | H, Ĝ)`, summed in row order; reproduces the value
    /// logged by [`iterative_fit`] for the selected iterate.
    pub fn training_loglik(&self, data: &DataMatrix) -> Result<f64> {
        Ok(self.logpdf_rows(data)?.iter().sum())
    }
}

// `ln ĝ(x) + Σ_j [ln f_j(y_j) − ln d_j(x_j)]`
fn assemble(joint: &MixtureModel, marginals: &[MarginalModel], denom: &[MarginalModel], y: &[f64], x: &[f64]) -> f64 {
    let mut adj = 0.0;
    for j in 0..y.len() {
        adj += marginals[j].ln_pdf(y[j]) - denom[j].ln_pdf(x[j]);
    }
    joint.logpdf(x) + adj
}

pub fn ct_logpdf(model: &CopulaTypeModel, y: &[f64]) -> Result<f64> {
    model.logpdf(y)
}

pub fn ct_marginal_logpdf(model: &CopulaTypeModel, j: usize, yj: f64) -> Result<f64> {
    model.marginal_logpdf(j, yj)
}

pub fn exact_copula_logpdf(model: &CopulaTypeModel, y: &[f64]) -> Result<f64> {
    model.exact_copula_logpdf(y)
}

fn initial_working(y: &DataMatrix, opts: &CopulaOptions) -> Result<Vec<MarginalModel>> {
    let d = y.ncols();
    match &opts.init {
        InitialWorking::StandardNormal => Ok(vec![MarginalModel::Normal { mean: 0.0, sd: 1.0 }; d]),
        InitialWorking::Given(h) => {
            check_width(d, h.len())?;
            Ok(h.clone())
        }
        InitialWorking::Implied => {
            let mut vb_opts = opts.vb.clone();
            vb_opts.seed = derive_seed(opts.vb.seed, &[0]);
            let direct = vb::fit(y, opts.family, &opts.priors, &vb_opts)?;
            (0..d).map(|j| implied_marginal(&direct.model, j)).collect()
        }
    }
}

/// Alternate between transforming to X-space, fitting `Ĝ` by elimination
/// VB and resetting `H_j := Ĝ_j`, keeping the iterate with the largest
/// training log-likelihood `Σ_i ln f̂(y_i | H, Ĝ)`.
///
/// Stops after `patience` consecutive iterations without improvement or at
/// `max_iter`.
pub fn iterative_fit(y: &DataMatrix, marginals: &[MarginalModel], opts: &CopulaOptions) -> Result<CopulaTypeModel> {
    let (n, d) = (y.nrows(), y.ncols());
    check_width(d, marginals.len())?;
    if opts.max_iter == 0 {
        return Err(Error::Usage("max_iter must be positive".into()));
    }
    let u = to_u_space(y, marginals)?;
    let mut working = initial_working(y, opts)?;
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut best: Option<CopulaTypeModel> = None;
    let mut stale = 0;
    for it in 1..=opts.max_iter {
        let partial = |e: Error, log: &[IterationRecord]| {
            Error::fit(
                format!("iteration {it} of the copula-type fit failed: {e}"),
                log.iter().map(|r| r.loglik).collect(),
            )
        };
        let x = to_x_space(&u, &working).map_err(|e| partial(e, &log))?;
        let mut vb_opts = opts.vb.clone();
        vb_opts.seed = derive_seed(opts.vb.seed, &[it as u64]);
        let fit = vb::fit(&x, opts.family, &opts.priors, &vb_opts).map_err(|e| partial(e, &log))?;
        let joint = fit.model;
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| assemble(&joint, marginals, &working, y.row(i), x.row(i)))
            .collect();
        let loglik: f64 = rows.iter().sum();
        if !loglik.is_finite() {
            return Err(partial(Error::Numeric(format!("training log-likelihood {loglik}")), &log));
        }
        log.push(IterationRecord {
            iteration: it,
            loglik,
            k: joint.n_components(),
        });
        let next: Vec<MarginalModel> = (0..d).map(|j| implied_marginal(&joint, j)).collect::<Result<_>>()?;
        let improved = best.as_ref().and_then(CopulaTypeModel::loglik).is_none_or(|b| loglik > b);
        if improved {
            let mut model = CopulaTypeModel::new(marginals.to_vec(), working, joint)?;
            model.selected_iteration = it;
            model.iteration_log = log.clone();
            best = Some(model);
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
        working = next;
    }
    let mut model = best.expect("at least one iteration ran");
    model.iteration_log = log;
    Ok(model)
}

/// Write `(iteration, loglik, k)` rows as CSV.
pub fn write_iteration_csv<W: std::io::Write>(log: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,loglik,k")?;
    for r in log {
        writeln!(out, "{},{},{}", r.iteration, r.loglik, r.k)?;
    }
    Ok(())
}
