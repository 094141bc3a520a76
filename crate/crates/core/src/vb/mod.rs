//! Variational Bayes mixture fitting: mixtures of normals (MN), of t (Mt),
//! of factor analyzers (MFA) and of t-factor analyzers (MtFA).
//!
//! The t engines treat each observation's precision multiplier `w_ij` as a
//! gamma latent variable. The normal engines are the same code with
//! `w_ij ≡ 1`, no `q(w)` block and no degrees-of-freedom step. Component
//! counts are chosen by elimination (see [`evb_fit`]); factor counts by
//! pruning loading columns whose prior precision posterior implies
//! negligible variance (see [`prune_factors`]).

mod dof;
mod evb;
mod factor;
mod full;
mod kmeans;
mod model;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dof::{dof_objective, optimize_dof};
pub use evb::{evb_fit, fit, fit_standardized, FitResult};
pub use factor::{initial_factor_count, FactorState};
pub use full::{expected_log_det, expected_log_w, expected_w, FullState};
pub use kmeans::kmeans_labels;
pub use model::{mixture_logpdf, Component, ComponentScale, MixtureModel};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    MN,
    Mt,
    MFA,
    MtFA,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::MN, Family::Mt, Family::MFA, Family::MtFA];

    pub fn is_t(self) -> bool {
        matches!(self, Family::Mt | Family::MtFA)
    }

    pub fn is_factor(self) -> bool {
        matches!(self, Family::MFA | Family::MtFA)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::MN => "MN",
            Family::Mt => "Mt",
            Family::MFA => "MFA",
            Family::MtFA => "MtFA",
        };
        f.write_str(s)
    }
}

/// Prior hyperparameters, stated for standardized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    /// Symmetric Dirichlet concentration on the weights.
    pub alpha0: f64,
    /// Normal–Wishart mean precision multiplier.
    pub kappa0: f64,
    /// Wishart degrees of freedom; `None` means `d + 2`.
    pub tau0: Option<f64>,
    /// `Σ^0 = sigma0 · I`.
    pub sigma0: f64,
    /// Gamma shape for loading precisions and noise precisions.
    pub gamma_a: f64,
    /// Gamma rate for loading precisions and noise precisions.
    pub gamma_b: f64,
    /// Prior variance of factor-model component means.
    pub mu_prior_var: f64,
    /// Upper bound of the degrees-of-freedom grid.
    pub lambda0: u32,
    /// Factor pruning threshold on the posterior mean of `τ^{-1}`.
    pub epsilon: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            alpha0: 1.0,
            kappa0: 0.01,
            tau0: None,
            sigma0: 1.0,
            gamma_a: 1e-3,
            gamma_b: 1e-3,
            mu_prior_var: 100.0,
            lambda0: 100,
            epsilon: 1e-3,
        }
    }
}

impl Priors {
    pub fn tau0(&self, d: usize) -> f64 {
        self.tau0.unwrap_or(d as f64 + 2.0)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let positive = [
            ("alpha0", self.alpha0),
            ("kappa0", self.kappa0),
            ("sigma0", self.sigma0),
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("mu_prior_var", self.mu_prior_var),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Usage(format!("prior {name} must be positive, got {v}")));
            }
        }
        if self.lambda0 < 1 {
            return Err(Error::Usage("lambda0 must be at least 1".into()));
        }
        if self.tau0(d) < d as f64 {
            return Err(Error::Usage(format!("tau0 must be at least d = {d}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub k_init: usize,
    pub max_sweeps: usize,
    /// Convergence threshold on the sup-norm change of the main parameters.
    pub tol: f64,
    pub seed: u64,
    /// Pin every component's degrees of freedom (t families only).
    pub fixed_dof: Option<u32>,
    /// Starting factor count; `None` uses the largest identifiable count.
    pub initial_factors: Option<usize>,
    /// Run component elimination after the first convergence.
    pub eliminate: bool,
    /// Record one trace row per sweep.
    pub trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            k_init: 5,
            max_sweeps: 500,
            tol: 1e-5,
            seed: 0,
            fixed_dof: None,
            initial_factors: None,
            eliminate: true,
            trace: false,
        }
    }
}

/// One row of the ELBO/occupancy trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: usize,
    pub elbo: f64,
    pub k: usize,
    pub factors: Vec<usize>,
    pub dof: Vec<u32>,
}

/// Write trace rows as CSV. Factor counts and dofs are `;`-joined so that
/// every row has the same number of fields.
pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "sweep,elbo,K,factors,dof")?;
    for r in rows {
        let join = |v: Vec<String>| v.join(";");
        writeln!(
            out,
            "{},{},{},{},{}",
            r.sweep,
            r.elbo,
            r.k,
            join(r.factors.iter().map(|v| v.to_string()).collect()),
            join(r.dof.iter().map(|v| v.to_string()).collect())
        )?;
    }
    Ok(())
}

/// Full variational state of either engine.
#[derive(Debug, Clone)]
pub enum VbState {
    Full(FullState),
    Factor(FactorState),
}

impl VbState {
    pub fn init(
        x: &Matrix<f64>,
        family: Family,
        labels: &[usize],
        k: usize,
        priors: &Priors,
        opts: &FitOptions,
    ) -> Result<Self> {
        Ok(if family.is_factor() {
            let kf = opts
                .initial_factors
                .unwrap_or_else(|| initial_factor_count(x.cols()));
            VbState::Factor(FactorState::init(x, family.is_t(), labels, k, kf, priors, opts.fixed_dof)?)
        } else {
            VbState::Full(FullState::init(x, family.is_t(), labels, k, priors, opts.fixed_dof)?)
        })
    }

    pub fn family(&self) -> Family {
        match self {
            VbState::Full(s) if s.is_t() => Family::Mt,
            VbState::Full(_) => Family::MN,
            VbState::Factor(s) if s.is_t() => Family::MtFA,
            VbState::Factor(_) => Family::MFA,
        }
    }

    pub fn sweep(&mut self, x: &Matrix<f64>, priors: &Priors, update_dof: bool) -> Result<()> {
        match self {
            VbState::Full(s) => s.sweep(x, priors, update_dof),
            VbState::Factor(s) => s.sweep(x, priors, update_dof),
        }
    }

    pub fn elbo(&self) -> f64 {
        match self {
            VbState::Full(s) => s.elbo,
            VbState::Factor(s) => s.elbo,
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            VbState::Full(s) => s.n_components(),
            VbState::Factor(s) => s.n_components(),
        }
    }

    pub fn occupancy(&self) -> Vec<f64> {
        match self {
            VbState::Full(s) => s.occupancy(),
            VbState::Factor(s) => s.occupancy(),
        }
    }

    pub fn responsibilities(&self) -> &Matrix<f64> {
        match self {
            VbState::Full(s) => &s.resp,
            VbState::Factor(s) => &s.resp,
        }
    }

    pub fn remove_component(&mut self, j: usize) {
        match self {
            VbState::Full(s) => s.remove_component(j),
            VbState::Factor(s) => s.remove_component(j),
        }
    }

    pub fn factor_counts(&self) -> Vec<usize> {
        match self {
            VbState::Full(_) => Vec::new(),
            VbState::Factor(s) => s.factor_counts(),
        }
    }

    pub fn dofs(&self) -> Vec<u32> {
        match self {
            VbState::Full(s) if s.is_t() => s.nu.clone(),
            VbState::Factor(s) if s.is_t() => s.nu.clone(),
            _ => Vec::new(),
        }
    }

    /// Stacked main parameters used by the convergence test.
    pub(crate) fn main_params(&self) -> Vec<Vec<f64>> {
        match self {
            VbState::Full(s) => s.main_params(),
            VbState::Factor(s) => s.main_params(),
        }
    }

    pub fn to_model(&self, standardization: crate::data::Standardization) -> Result<MixtureModel> {
        match self {
            VbState::Full(s) => s.to_model(standardization),
            VbState::Factor(s) => s.to_model(standardization),
        }
    }
}

/// One coordinate-ascent sweep of the full-scale engine (MN or Mt).
pub fn vb_sweep_mt(state: &mut FullState, x: &Matrix<f64>, priors: &Priors) -> Result<()> {
    state.sweep(x, priors, true)
}

/// One coordinate-ascent sweep of the factor engine (MFA or MtFA).
pub fn vb_sweep_mtfa(state: &mut FactorState, x: &Matrix<f64>, priors: &Priors) -> Result<()> {
    state.sweep(x, priors, true)
}

/// Evidence lower bound of a full-scale state.
pub fn elbo_mt(state: &FullState, x: &Matrix<f64>, priors: &Priors) -> f64 {
    state.compute_elbo(x, priors)
}

/// Drop loading columns with `b_τ / (a_τ − 1) < ε`. Returns whether any
/// column was removed.
pub fn prune_factors(state: &mut FactorState, x: &Matrix<f64>, priors: &Priors) -> bool {
    state.prune_factors(x, priors)
}
