use super::kmeans::kmeans_labels;
use super::model::MixtureModel;
use super::{Family, FitOptions, Priors, TraceRow, VbState};
use crate::data::{standardize, DataMatrix, Standardization};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MixtureModel,
    pub state: VbState,
    pub elbo: f64,
    pub trace: Vec<TraceRow>,
    /// `(K before, ELBO before, ELBO after)` for each accepted removal.
    pub removals: Vec<(usize, f64, f64)>,
}

fn record(state: &VbState, sweep: usize, trace: &mut Vec<TraceRow>) {
    trace.push(TraceRow {
        sweep,
        elbo: state.elbo(),
        k: state.n_components(),
        factors: state.factor_counts(),
        dof: state.dofs(),
    });
}

fn sup_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut m: f64 = 0.0;
    for (u, v) in a.iter().zip(b) {
        if u.len() != v.len() {
            return f64::INFINITY;
        }
        for (p, q) in u.iter().zip(v) {
            m = m.max((p - q).abs());
        }
    }
    m
}

/// Standard VB: sweep until the main parameters stop moving.
fn converge(
    state: &mut VbState,
    x: &Matrix<f64>,
    priors: &Priors,
    opts: &FitOptions,
    trace: &mut Vec<TraceRow>,
    sweep: &mut usize,
) -> Result<()> {
    for _ in 0..opts.max_sweeps {
        let before = state.main_params();
        if let Err(e) = state.sweep(x, priors, true) {
            let elbos = trace.iter().map(|r| r.elbo).collect();
            return Err(match e {
                Error::Fit { message, .. } => Error::Fit { message, trace: elbos },
                other => other,
            });
        }
        *sweep += 1;
        if opts.trace {
            record(state, *sweep, trace);
        }
        if sup_change(&before, &state.main_params()) < opts.tol {
            break;
        }
    }
    Ok(())
}

/// Elimination VB on already standardized data.
///
/// Converge from a k-means start; for factor families prune loading
/// columns; then repeatedly try deleting the component with the smallest
/// occupancy, keeping the deletion only if the re-converged bound is
/// higher. Factor families repeat pruning and elimination while the bound
/// improves.
pub fn evb_fit(
    x: &Matrix<f64>,
    family: Family,
    priors: &Priors,
    opts: &FitOptions,
) -> Result<(VbState, Vec<TraceRow>, Vec<(usize, f64, f64)>)> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 || d == 0 {
        return Err(Error::Data(format!("cannot fit a mixture to {n} × {d} data")));
    }
    if opts.k_init == 0 {
        return Err(Error::Usage("k_init must be at least 1".into()));
    }
    priors.validate(d)?;
    let labels = kmeans_labels(x, opts.k_init, derive_seed(opts.seed, &[0]), 100);
    let k = labels.iter().max().map_or(1, |m| m + 1);
    let mut state = VbState::init(x, family, &labels, k, priors, opts)?;
    let mut trace = Vec::new();
    let mut sweep = 0;
    converge(&mut state, x, priors, opts, &mut trace, &mut sweep)?;
    let mut removals = Vec::new();
    if !opts.eliminate {
        return Ok((state, trace, removals));
    }
    for _round in 0..20 {
        let start = state.elbo();
        if let VbState::Factor(s) = &mut state {
            if s.prune_factors(x, priors) {
                converge(&mut state, x, priors, opts, &mut trace, &mut sweep)?;
            }
        }
        while state.n_components() > 1 {
            let occ = state.occupancy();
            let j = (0..occ.len())
                .min_by(|&a, &b| occ[a].total_cmp(&occ[b]))
                .unwrap_or(0);
            let mut cand = state.clone();
            cand.remove_component(j);
            let mut cand_trace = Vec::new();
            let mut cand_sweep = sweep;
            converge(&mut cand, x, priors, opts, &mut cand_trace, &mut cand_sweep)?;
            if cand.elbo() > state.elbo() {
                removals.push((state.n_components(), state.elbo(), cand.elbo()));
                state = cand;
                trace.extend(cand_trace);
                sweep = cand_sweep;
            } else {
                break;
            }
        }
        if !family.is_factor() || !(state.elbo() > start) {
            break;
        }
    }
    Ok((state, trace, removals))
}

/// Fit on data already in standardized units; the record is stored in the
/// returned model.
pub fn fit_standardized(
    x: &Matrix<f64>,
    standardization: Standardization,
    family: Family,
    priors: &Priors,
    opts: &FitOptions,
) -> Result<FitResult> {
    let (state, trace, removals) = evb_fit(x, family, priors, opts)?;
    let model = state.to_model(standardization)?;
    Ok(FitResult {
        model,
        elbo: state.elbo(),
        state,
        trace,
        removals,
    })
}

/// Standardize the columns, run elimination VB, and return the plug-in
/// mixture in original units.
pub fn fit(data: &DataMatrix, family: Family, priors: &Priors, opts: &FitOptions) -> Result<FitResult> {
    let (z, rec) = standardize(data)?;
    fit_standardized(z.matrix(), rec, family, priors, opts)
}
