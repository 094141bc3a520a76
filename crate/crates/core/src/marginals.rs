//! Univariate marginal estimators and their cross-validated selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{mean_and_sd, DataMatrix};
use crate::error::{Error, Result};
use crate::evaluation::folds::{complement, fold_partition};
use crate::numerics::univariate::{std_normal_cdf, std_normal_ln_pdf, std_t_cdf, std_t_ln_pdf};
use crate::numerics::{invert_cdf, log_sum_exp, Normal, StudentT, UnivariateCdf};
use crate::seed::derive_seed;
use crate::vb::{self, Family, FitOptions, MixtureModel, Priors};

/// Finite mixture of univariate normals (`dofs = None`) or t's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivMixture {
    pub weights: Vec<f64>,
    pub locations: Vec<f64>,
    pub scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dofs: Option<Vec<u32>>,
}

impl UnivMixture {
    pub fn new(weights: Vec<f64>, locations: Vec<f64>, scales: Vec<f64>, dofs: Option<Vec<u32>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || locations.len() != k || scales.len() != k || dofs.as_ref().is_some_and(|v| v.len() != k) {
            return Err(Error::Data("mixture parameter lengths disagree".into()));
        }
        if scales.iter().any(|&s| !(s > 0.0)) || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Data("mixture scales must be positive and weights nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(UnivMixture {
            weights,
            locations,
            scales,
            dofs,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    fn component_ln_pdf(&self, k: usize, x: f64) -> f64 {
        let z = (x - self.locations[k]) / self.scales[k];
        let base = match &self.dofs {
            Some(v) => std_t_ln_pdf(z, v[k] as f64),
            None => std_normal_ln_pdf(z),
        };
        base - self.scales[k].ln()
    }

    fn component_cdf(&self, k: usize, x: f64) -> f64 {
        let z = (x - self.locations[k]) / self.scales[k];
        match &self.dofs {
            Some(v) => std_t_cdf(z, v[k] as f64),
            None => std_normal_cdf(z),
        }
    }

    fn from_model(model: &MixtureModel, j: usize) -> Self {
        let parts = model.marginal_components(j);
        UnivMixture {
            weights: parts.iter().map(|p| p.0).collect(),
            locations: parts.iter().map(|p| p.1).collect(),
            scales: parts.iter().map(|p| p.2).collect(),
            dofs: model.family().is_t().then(|| parts.iter().map(|p| p.3.unwrap_or(1)).collect()),
        }
    }
}

impl UnivariateCdf<f64> for UnivMixture {
    fn ln_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| self.weights[k].ln() + self.component_ln_pdf(k, x))
            .collect();
        log_sum_exp(&terms)
    }

    fn cdf(&self, x: f64) -> f64 {
        (0..self.n_components())
            .map(|k| self.weights[k] * self.component_cdf(k, x))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    fn location_hint(&self) -> (f64, f64) {
        let mean: f64 = self.weights.iter().zip(&self.locations).map(|(w, m)| w * m).sum();
        let second: f64 = (0..self.n_components())
            .map(|k| self.weights[k] * (self.scales[k].powi(2) + (self.locations[k] - mean).powi(2)))
            .sum();
        (mean, second.sqrt())
    }
}

/// A fitted univariate density with pdf, cdf and quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalModel {
    /// Gaussian kernel estimator.
    Kernel { points: Vec<f64>, bandwidth: f64 },
    UnivMixNormal { mixture: UnivMixture },
    UnivMixT { mixture: UnivMixture },
    /// Coordinate marginal of a multivariate normal-type mixture.
    ImpliedMixNormal { coordinate: usize, mixture: UnivMixture },
    /// Coordinate marginal of a multivariate t-type mixture.
    ImpliedMixT { coordinate: usize, mixture: UnivMixture },
    Normal { mean: f64, sd: f64 },
    StudentT { loc: f64, scale: f64, nu: f64 },
}

impl MarginalModel {
    pub fn kind(&self) -> &'static str {
        match self {
            MarginalModel::Kernel { .. } => "kernel",
            MarginalModel::UnivMixNormal { .. } => "univ_mix_normal",
            MarginalModel::UnivMixT { .. } => "univ_mix_t",
            MarginalModel::ImpliedMixNormal { .. } => "implied_mix_normal",
            MarginalModel::ImpliedMixT { .. } => "implied_mix_t",
            MarginalModel::Normal { .. } => "normal",
            MarginalModel::StudentT { .. } => "student_t",
        }
    }

    pub fn mixture(&self) -> Option<&UnivMixture> {
        match self {
            MarginalModel::UnivMixNormal { mixture }
            | MarginalModel::UnivMixT { mixture }
            | MarginalModel::ImpliedMixNormal { mixture, .. }
            | MarginalModel::ImpliedMixT { mixture, .. } => Some(mixture),
            _ => None,
        }
    }

    /// Number of mixture components, 1 for parametric models and `n` for a
    /// kernel estimator.
    pub fn n_components(&self) -> usize {
        match self {
            MarginalModel::Kernel { points, .. } => points.len(),
            MarginalModel::Normal { .. } | MarginalModel::StudentT { .. } => 1,
            other => other.mixture().map_or(1, UnivMixture::n_components),
        }
    }
}

impl UnivariateCdf<f64> for MarginalModel {
    fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            MarginalModel::Kernel { points, bandwidth } => {
                let terms: Vec<f64> = points
                    .iter()
                    .map(|p| std_normal_ln_pdf((x - p) / bandwidth))
                    .collect();
                log_sum_exp(&terms) - (points.len() as f64).ln() - bandwidth.ln()
            }
            MarginalModel::Normal { mean, sd } => std_normal_ln_pdf((x - mean) / sd) - sd.ln(),
            MarginalModel::StudentT { loc, scale, nu } => std_t_ln_pdf((x - loc) / scale, *nu) - scale.ln(),
            other => other.mixture().expect("mixture variant").ln_pdf(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            MarginalModel::Kernel { points, bandwidth } => {
                let s: f64 = points.iter().map(|p| std_normal_cdf((x - p) / bandwidth)).sum();
                (s / points.len() as f64).clamp(0.0, 1.0)
            }
            MarginalModel::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            MarginalModel::StudentT { loc, scale, nu } => std_t_cdf((x - loc) / scale, *nu),
            other => other.mixture().expect("mixture variant").cdf(x),
        }
    }

    fn location_hint(&self) -> (f64, f64) {
        match self {
            MarginalModel::Kernel { points, bandwidth } => {
                let (m, sd) = mean_and_sd(points);
                (m, sd.max(*bandwidth))
            }
            MarginalModel::Normal { mean, sd } => (*mean, *sd),
            MarginalModel::StudentT { loc, scale, .. } => (*loc, *scale),
            other => other.mixture().expect("mixture variant").location_hint(),
        }
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            MarginalModel::Normal { mean, sd } => Normal::new(*mean, *sd).quantile(u),
            MarginalModel::StudentT { loc, scale, nu } => StudentT::new(*loc, *scale, *nu).quantile(u),
            other => invert_cdf(other, u),
        }
    }
}

/// Sample quantile with linear interpolation between order statistics.
fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9·min(sd, IQR/1.34)·n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let (_, sd) = mean_and_sd(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = sample_quantile(&sorted, 0.75) - sample_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (samples.len() as f64).powf(-0.2)
}

fn check_samples(samples: &[f64], min_n: usize) -> Result<()> {
    if samples.len() < min_n {
        return Err(Error::Data(format!("need at least {min_n} samples, got {}", samples.len())));
    }
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample {v}")));
    }
    let (_, sd) = mean_and_sd(samples);
    if !(sd > 0.0) {
        return Err(Error::Data("samples have zero variance".into()));
    }
    Ok(())
}

pub fn fit_kernel(samples: &[f64]) -> Result<MarginalModel> {
    check_samples(samples, 2)?;
    Ok(MarginalModel::Kernel {
        points: samples.to_vec(),
        bandwidth: silverman_bandwidth(samples),
    })
}

/// Maximum-likelihood normal.
pub fn fit_normal(samples: &[f64]) -> Result<MarginalModel> {
    check_samples(samples, 2)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(MarginalModel::Normal { mean, sd: var.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnivFamily {
    Normal,
    T,
}

/// Univariate mixture fitted by elimination VB (the multivariate engine
/// with d = 1).
pub fn fit_univ_mixture(
    samples: &[f64],
    family: UnivFamily,
    priors: &Priors,
    opts: &FitOptions,
) -> Result<MarginalModel> {
    check_samples(samples, 10)?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|&v| vec![v]).collect();
    let data = DataMatrix::from_rows(&rows)?;
    let fam = match family {
        UnivFamily::Normal => Family::MN,
        UnivFamily::T => Family::Mt,
    };
    let res = vb::fit(&data, fam, priors, opts)?;
    let mixture = UnivMixture::from_model(&res.model, 0);
    Ok(match family {
        UnivFamily::Normal => MarginalModel::UnivMixNormal { mixture },
        UnivFamily::T => MarginalModel::UnivMixT { mixture },
    })
}

/// Analytic coordinate-`j` marginal of a fitted mixture (0-based `j`).
pub fn implied_marginal(joint: &MixtureModel, j: usize) -> Result<MarginalModel> {
    if j >= joint.dim() {
        return Err(Error::Usage(format!(
            "coordinate {j} out of range for a {}-variate mixture",
            joint.dim()
        )));
    }
    let mixture = UnivMixture::from_model(joint, j);
    Ok(if joint.family().is_t() {
        MarginalModel::ImpliedMixT { coordinate: j, mixture }
    } else {
        MarginalModel::ImpliedMixNormal { coordinate: j, mixture }
    })
}

/// Class of marginal estimator, fitted from data by [`fit_marginals`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalSpec {
    Kernel,
    UnivMixNormal,
    UnivMixT,
    ImpliedMixNormal,
    ImpliedMixT,
    Normal,
    /// A known model used as is, whatever the data.
    Fixed(MarginalModel),
}

impl MarginalSpec {
    /// The five classes of the standard candidate set.
    pub fn standard_candidates() -> Vec<MarginalSpec> {
        vec![
            MarginalSpec::Kernel,
            MarginalSpec::UnivMixNormal,
            MarginalSpec::UnivMixT,
            MarginalSpec::ImpliedMixNormal,
            MarginalSpec::ImpliedMixT,
        ]
    }

    fn joint_family(&self) -> Option<Family> {
        match self {
            MarginalSpec::ImpliedMixNormal => Some(Family::MN),
            MarginalSpec::ImpliedMixT => Some(Family::Mt),
            _ => None,
        }
    }
}

impl fmt::Display for MarginalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MarginalSpec::Kernel => "kernel",
            MarginalSpec::UnivMixNormal => "univ_mix_normal",
            MarginalSpec::UnivMixT => "univ_mix_t",
            MarginalSpec::ImpliedMixNormal => "implied_mix_normal",
            MarginalSpec::ImpliedMixT => "implied_mix_t",
            MarginalSpec::Normal => "normal",
            MarginalSpec::Fixed(m) => return write!(f, "fixed_{}", m.kind()),
        };
        f.write_str(s)
    }
}

impl FromStr for MarginalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "kernel" | "kde" => MarginalSpec::Kernel,
            "univ_mix_normal" | "mix_normal" => MarginalSpec::UnivMixNormal,
            "univ_mix_t" | "mix_t" => MarginalSpec::UnivMixT,
            "implied_mix_normal" | "implied_normal" => MarginalSpec::ImpliedMixNormal,
            "implied_mix_t" | "implied_t" => MarginalSpec::ImpliedMixT,
            "normal" => MarginalSpec::Normal,
            other => return Err(Error::Usage(format!("unknown marginal estimator '{other}'"))),
        })
    }
}

/// Settings shared by every VB fit made for the marginals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarginalOptions {
    pub priors: Priors,
    pub vb: FitOptions,
}

fn fit_one(
    samples: &[f64],
    spec: &MarginalSpec,
    column: usize,
    joints: &mut [(Family, Option<Result<MixtureModel>>)],
    data: &DataMatrix,
    opts: &MarginalOptions,
) -> Result<MarginalModel> {
    match spec {
        MarginalSpec::Kernel => fit_kernel(samples),
        MarginalSpec::Normal => fit_normal(samples),
        MarginalSpec::UnivMixNormal => fit_univ_mixture(samples, UnivFamily::Normal, &opts.priors, &opts.vb),
        MarginalSpec::UnivMixT => fit_univ_mixture(samples, UnivFamily::T, &opts.priors, &opts.vb),
        MarginalSpec::Fixed(m) => Ok(m.clone()),
        MarginalSpec::ImpliedMixNormal | MarginalSpec::ImpliedMixT => {
            let fam = spec.joint_family().expect("implied spec");
            let slot = joints
                .iter_mut()
                .find(|(f, _)| *f == fam)
                .expect("joint slot for every implied family");
            let joint = slot
                .1
                .get_or_insert_with(|| vb::fit(data, fam, &opts.priors, &opts.vb).map(|r| r.model));
            match joint {
                Ok(model) => implied_marginal(model, column),
                Err(e) => Err(Error::fit(format!("joint {fam} fit for implied marginal failed: {e}"), Vec::new())),
            }
        }
    }
}

fn joint_slots() -> Vec<(Family, Option<Result<MixtureModel>>)> {
    vec![(Family::MN, None), (Family::Mt, None)]
}

/// Fit one marginal per column; `specs[j]` is the class for column `j`.
/// Implied classes share a single joint fit per family.
pub fn fit_marginals(data: &DataMatrix, specs: &[MarginalSpec], opts: &MarginalOptions) -> Result<Vec<MarginalModel>> {
    if specs.len() != data.ncols() {
        return Err(Error::Usage(format!(
            "{} marginal specs for {} columns",
            specs.len(),
            data.ncols()
        )));
    }
    let mut joints = joint_slots();
    specs
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let col = data.column(j);
            fit_one(&col, spec, j, &mut joints, data, opts)
        })
        .collect()
}

/// Cross-validated score of one candidate; `lpds` is `None` when a fold
/// fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: String,
    pub lpds: Option<f64>,
}

/// Outcome of cross-validated selection for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSelection {
    pub column: usize,
    pub spec: MarginalSpec,
    pub model: MarginalModel,
    pub scores: Vec<CandidateScore>,
}

/// Choose, per column, the candidate with the smallest `folds`-fold
/// cross-validated LPDS (ties to the earlier candidate), then refit it on
/// all rows.
pub fn select_marginals(
    data: &DataMatrix,
    candidates: &[MarginalSpec],
    folds: usize,
    seed: u64,
    opts: &MarginalOptions,
) -> Result<Vec<MarginalSelection>> {
    let (n, d) = (data.nrows(), data.ncols());
    if candidates.is_empty() {
        return Err(Error::Usage("no marginal candidates".into()));
    }
    if folds < 2 || folds > n {
        return Err(Error::Usage(format!("fold count {folds} must lie in 2..={n}")));
    }
    let parts = fold_partition(n, folds, derive_seed(seed, &[0]));
    // sums[j][c]: total negative log density of held-out points
    let mut sums = vec![vec![0.0; candidates.len()]; d];
    for (b, test) in parts.iter().enumerate() {
        let train = data.select_rows(&complement(n, test));
        let mut fold_opts = opts.clone();
        fold_opts.vb.seed = derive_seed(seed, &[1, b as u64]);
        let mut joints = joint_slots();
        for j in 0..d {
            let col = train.column(j);
            for (c, spec) in candidates.iter().enumerate() {
                let score = match fit_one(&col, spec, j, &mut joints, &train, &fold_opts) {
                    Ok(m) => test.iter().map(|&i| -m.ln_pdf(data.row(i)[j])).sum::<f64>(),
                    Err(_) => f64::INFINITY,
                };
                sums[j][c] += if score.is_nan() { f64::INFINITY } else { score };
            }
        }
    }
    let mut full_opts = opts.clone();
    full_opts.vb.seed = derive_seed(seed, &[2]);
    let mut joints = joint_slots();
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let scores: Vec<f64> = sums[j].iter().map(|s| s / n as f64).collect();
        let mut best = 0;
        for c in 1..scores.len() {
            if scores[c] < scores[best] {
                best = c;
            }
        }
        if !scores[best].is_finite() {
            return Err(Error::fit(
                format!("every marginal candidate failed for column {}", j + 1),
                scores,
            ));
        }
        let model = fit_one(&data.column(j), &candidates[best], j, &mut joints, data, &full_opts)?;
        out.push(MarginalSelection {
            column: j,
            spec: candidates[best].clone(),
            model,
            scores: candidates
                .iter()
                .zip(scores)
                .map(|(c, v)| CandidateScore {
                    candidate: c.to_string(),
                    lpds: v.is_finite().then_some(v),
                })
                .collect(),
        });
    }
    Ok(out)
}

/// Single-column version of [`select_marginals`].
pub fn select_marginal(
    samples: &[f64],
    candidates: &[MarginalSpec],
    folds: usize,
    seed: u64,
    opts: &MarginalOptions,
) -> Result<MarginalSelection> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|&v| vec![v]).collect();
    let data = DataMatrix::from_rows(&rows)?;
    Ok(select_marginals(&data, candidates, folds, seed, opts)?.remove(0))
}
