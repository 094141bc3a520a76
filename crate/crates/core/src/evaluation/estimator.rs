use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Density;
use crate::copula::{fit_parametric_copula, iterative_fit, to_u_space, CopulaKind, CopulaOptions, CopulaTypeModel, InitialWorking, ParametricCopulaModel};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::marginals::{fit_marginals, select_marginals, MarginalOptions, MarginalSelection, MarginalSpec};
use crate::seed::derive_seed;
use crate::vb::{self, Family, FitOptions, MixtureModel, Priors, TraceRow};

/// The estimators compared: direct mixtures, parametric copulas and
/// copula-type mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorId {
    Mixture(Family),
    Copula(CopulaKind),
    CopulaType(Family),
}

impl EstimatorId {
    pub fn all() -> Vec<EstimatorId> {
        let mut v: Vec<EstimatorId> = Family::ALL.iter().map(|&f| EstimatorId::Mixture(f)).collect();
        v.push(EstimatorId::Copula(CopulaKind::Normal));
        v.push(EstimatorId::Copula(CopulaKind::T));
        v.extend(Family::ALL.iter().map(|&f| EstimatorId::CopulaType(f)));
        v
    }

    pub fn needs_marginals(self) -> bool {
        !matches!(self, EstimatorId::Mixture(_))
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorId::Mixture(fam) => write!(f, "{fam}"),
            EstimatorId::Copula(k) => f.write_str(k.label()),
            EstimatorId::CopulaType(fam) => write!(f, "CT-{fam}"),
        }
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        EstimatorId::all()
            .into_iter()
            .find(|id| id.to_string().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::Usage(format!("unknown estimator '{s}'")))
    }
}

/// How the marginals `F_j` are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalPlan {
    /// Pick a class per column by cross-validation.
    Select { candidates: Vec<MarginalSpec>, folds: usize },
    /// One class per column.
    Classes(Vec<MarginalSpec>),
}

impl Default for MarginalPlan {
    fn default() -> Self {
        MarginalPlan::Select {
            candidates: MarginalSpec::standard_candidates(),
            folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub id: EstimatorId,
    pub priors: Priors,
    pub vb: FitOptions,
    pub marginals: MarginalPlan,
    pub init: InitialWorking,
    pub max_iter: usize,
    pub patience: usize,
}

impl EstimatorSpec {
    pub fn new(id: EstimatorId) -> Self {
        let c = CopulaOptions::default();
        EstimatorSpec {
            id,
            priors: Priors::default(),
            vb: FitOptions::default(),
            marginals: MarginalPlan::default(),
            init: c.init,
            max_iter: c.max_iter,
            patience: c.patience,
        }
    }

    pub fn with_marginals(mut self, plan: MarginalPlan) -> Self {
        self.marginals = plan;
        self
    }

    fn marginal_options(&self, seed: u64) -> MarginalOptions {
        let mut vb = self.vb.clone();
        vb.seed = seed;
        vb.trace = false;
        MarginalOptions {
            priors: self.priors.clone(),
            vb,
        }
    }
}

/// A fitted estimator of any kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedEstimator {
    Mixture { model: MixtureModel },
    Copula { model: ParametricCopulaModel },
    CopulaType { model: CopulaTypeModel },
}

impl FittedEstimator {
    pub fn dim(&self) -> usize {
        match self {
            FittedEstimator::Mixture { model } => model.dim(),
            FittedEstimator::Copula { model } => model.dim(),
            FittedEstimator::CopulaType { model } => model.dim(),
        }
    }

    pub fn logpdf(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::Data(format!("point has {} coordinates, model has {}", y.len(), self.dim())));
        }
        match self {
            FittedEstimator::Mixture { model } => Ok(model.logpdf(y)),
            FittedEstimator::Copula { model } => model.logpdf(y),
            FittedEstimator::CopulaType { model } => model.logpdf(y),
        }
    }
}

impl Density for FittedEstimator {
    fn log_density(&self, y: &[f64]) -> Result<f64> {
        self.logpdf(y)
    }
}

impl Density for MixtureModel {
    fn log_density(&self, y: &[f64]) -> Result<f64> {
        Ok(self.logpdf(y))
    }
}

impl Density for CopulaTypeModel {
    fn log_density(&self, y: &[f64]) -> Result<f64> {
        self.logpdf(y)
    }
}

impl Density for ParametricCopulaModel {
    fn log_density(&self, y: &[f64]) -> Result<f64> {
        self.logpdf(y)
    }
}

/// Marginal classes for `spec` on `data`, with the selection table when
/// the plan asks for cross-validated selection.
pub fn resolve_marginal_classes(
    data: &DataMatrix,
    spec: &EstimatorSpec,
    seed: u64,
) -> Result<(Vec<MarginalSpec>, Vec<MarginalSelection>)> {
    match &spec.marginals {
        MarginalPlan::Classes(c) => {
            if c.len() != data.ncols() {
                return Err(Error::Usage(format!("{} marginal classes for {} columns", c.len(), data.ncols())));
            }
            Ok((c.clone(), Vec::new()))
        }
        MarginalPlan::Select { candidates, folds } => {
            let sel = select_marginals(data, candidates, *folds, seed, &spec.marginal_options(derive_seed(seed, &[0])))?;
            Ok((sel.iter().map(|s| s.spec.clone()).collect(), sel))
        }
    }
}

/// Fit `spec` to `train`. `classes` fixes the marginal classes; when absent
/// they are resolved from the spec's plan on `train` itself.
pub fn fit_estimator(
    train: &DataMatrix,
    spec: &EstimatorSpec,
    classes: Option<&[MarginalSpec]>,
    seed: u64,
) -> Result<FittedEstimator> {
    fit_estimator_traced(train, spec, classes, seed).map(|(m, _)| m)
}

/// As [`fit_estimator`], also returning the per-sweep VB trace of a direct
/// mixture fit when `spec.vb.trace` is set. Copula-type fits carry their
/// own iteration log.
pub fn fit_estimator_traced(
    train: &DataMatrix,
    spec: &EstimatorSpec,
    classes: Option<&[MarginalSpec]>,
    seed: u64,
) -> Result<(FittedEstimator, Vec<TraceRow>)> {
    let mut vb_opts = spec.vb.clone();
    vb_opts.seed = derive_seed(seed, &[1]);
    if let EstimatorId::Mixture(family) = spec.id {
        let fit = vb::fit(train, family, &spec.priors, &vb_opts)?;
        return Ok((FittedEstimator::Mixture { model: fit.model }, fit.trace));
    }
    vb_opts.trace = false;
    let resolved;
    let classes = match classes {
        Some(c) => c,
        None => {
            resolved = resolve_marginal_classes(train, spec, derive_seed(seed, &[2]))?.0;
            &resolved
        }
    };
    let marginals = fit_marginals(train, classes, &spec.marginal_options(derive_seed(seed, &[3])))?;
    match spec.id {
        EstimatorId::Copula(kind) => {
            let u = to_u_space(train, &marginals)?;
            let model = fit_parametric_copula(&u, kind, marginals, spec.priors.lambda0)?;
            Ok((FittedEstimator::Copula { model }, Vec::new()))
        }
        EstimatorId::CopulaType(family) => {
            let opts = CopulaOptions {
                family,
                init: spec.init.clone(),
                priors: spec.priors.clone(),
                vb: vb_opts,
                max_iter: spec.max_iter,
                patience: spec.patience,
            };
            let model = iterative_fit(train, &marginals, &opts)?;
            Ok((FittedEstimator::CopulaType { model }, Vec::new()))
        }
        EstimatorId::Mixture(_) => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in EstimatorId::all() {
            assert_eq!(id.to_string().parse::<EstimatorId>().unwrap(), id);
        }
        assert_eq!("ct-mtfa".parse::<EstimatorId>().unwrap(), EstimatorId::CopulaType(Family::MtFA));
        assert_eq!("TC".parse::<EstimatorId>().unwrap(), EstimatorId::Copula(CopulaKind::T));
        assert!("mamn".parse::<EstimatorId>().is_err());
        assert_eq!(EstimatorId::all().len(), 10);
    }
}
