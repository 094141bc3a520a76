//! Normal and t copulas with correlation-matrix dependence.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::marginals::MarginalModel;
use crate::numerics::univariate::{std_normal_ln_pdf, std_normal_quantile, std_t_ln_pdf};
use crate::numerics::{clamp_probability, mvn_logpdf, mvt_logpdf, Matrix, SpdMatrix, StudentT, UnivariateCdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaKind {
    Normal,
    T,
}

impl CopulaKind {
    pub fn label(self) -> &'static str {
        match self {
            CopulaKind::Normal => "NC",
            CopulaKind::T => "tC",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ParametricRecord", into = "ParametricRecord")]
pub struct ParametricCopulaModel {
    kind: CopulaKind,
    correlation: SpdMatrix<f64>,
    nu: Option<u32>,
    marginals: Vec<MarginalModel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParametricRecord {
    kind: CopulaKind,
    correlation: Matrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<u32>,
    marginals: Vec<MarginalModel>,
}

impl TryFrom<ParametricRecord> for ParametricCopulaModel {
    type Error = Error;

    fn try_from(r: ParametricRecord) -> Result<Self> {
        ParametricCopulaModel::new(r.kind, r.correlation, r.nu, r.marginals)
    }
}

impl From<ParametricCopulaModel> for ParametricRecord {
    fn from(m: ParametricCopulaModel) -> Self {
        ParametricRecord {
            kind: m.kind,
            correlation: m.correlation.into_matrix(),
            nu: m.nu,
            marginals: m.marginals,
        }
    }
}

/// `D^{-1/2} S D^{-1/2}` with an exactly unit diagonal.
fn to_correlation(s: &Matrix<f64>) -> Matrix<f64> {
    let d = s.rows();
    Matrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt()
        }
    })
}

impl ParametricCopulaModel {
    pub fn new(kind: CopulaKind, correlation: Matrix<f64>, nu: Option<u32>, marginals: Vec<MarginalModel>) -> Result<Self> {
        let d = correlation.rows();
        if correlation.cols() != d || marginals.len() != d {
            return Err(Error::Data(format!(
                "correlation is {}x{} with {} marginals",
                d,
                correlation.cols(),
                marginals.len()
            )));
        }
        if (0..d).any(|i| correlation[(i, i)] != 1.0) {
            return Err(Error::Data("correlation matrix must have a unit diagonal".into()));
        }
        match (kind, nu) {
            (CopulaKind::Normal, None) => {}
            (CopulaKind::T, Some(v)) if v > 0 => {}
            _ => return Err(Error::Data("t copulas need a positive dof and normal copulas none".into())),
        }
        Ok(ParametricCopulaModel {
            kind,
            correlation: SpdMatrix::new(correlation)?,
            nu,
            marginals,
        })
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    pub fn correlation(&self) -> &Matrix<f64> {
        self.correlation.matrix()
    }

    pub fn nu(&self) -> Option<u32> {
        self.nu
    }

    pub fn marginals(&self) -> &[MarginalModel] {
        &self.marginals
    }

    pub fn dim(&self) -> usize {
        self.correlation.dim()
    }

    /// `ln c(u)` for a point already in U-space.
    pub fn copula_logpdf(&self, u: &[f64]) -> Result<f64> {
        let x = self.to_x(u)?;
        Ok(copula_log_density(self.kind, self.nu, &self.correlation, &x))
    }

    fn to_x(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.iter().map(|&p| reference_quantile(self.nu, clamp_probability(p))).collect()
    }

    /// `ln c(F_1(y_1), …) + Σ ln f_j(y_j)`.
    pub fn logpdf(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::Usage(format!("point has {} coordinates, model has {}", y.len(), self.dim())));
        }
        let u: Vec<f64> = y.iter().zip(&self.marginals).map(|(&v, f)| f.cdf(v)).collect();
        let ln_f: f64 = y.iter().zip(&self.marginals).map(|(&v, f)| f.ln_pdf(v)).sum();
        Ok(self.copula_logpdf(&u)? + ln_f)
    }
}

fn reference_quantile(nu: Option<u32>, p: f64) -> Result<f64> {
    match nu {
        None => Ok(std_normal_quantile(p)),
        Some(v) => StudentT::standard(v as f64).quantile(p),
    }
}

fn copula_log_density(kind: CopulaKind, nu: Option<u32>, r: &SpdMatrix<f64>, x: &[f64]) -> f64 {
    let zero = vec![0.0; x.len()];
    match (kind, nu) {
        (CopulaKind::T, Some(v)) => {
            let v = v as f64;
            mvt_logpdf(x, &zero, r, v) - x.iter().map(|&t| std_t_ln_pdf(t, v)).sum::<f64>()
        }
        _ => mvn_logpdf(x, &zero, r) - x.iter().map(|&t| std_normal_ln_pdf(t)).sum::<f64>(),
    }
}

fn x_matrix(u: &DataMatrix, nu: Option<u32>) -> Result<Matrix<f64>> {
    let (n, d) = (u.nrows(), u.ncols());
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let p = u.row(i)[j];
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Data(format!("row {}, column {}: u = {p} outside (0, 1)", i + 1, j + 1)));
            }
            x[(i, j)] = reference_quantile(nu, p)?;
        }
    }
    Ok(x)
}

fn spd_correlation(s: &Matrix<f64>) -> Result<SpdMatrix<f64>> {
    let r = to_correlation(s);
    SpdMatrix::new(r.clone()).or_else(|_| {
        let mut j = r;
        j.add_diag(1e-8);
        SpdMatrix::new(to_correlation(&j))
    })
    .map_err(|e| Error::fit(format!("correlation matrix is rank deficient: {e}"), Vec::new()))
}

// EM for the scale of a zero-location multivariate t with known dof.
fn t_scale_em(x: &Matrix<f64>, nu: f64, start: &Matrix<f64>) -> Result<SpdMatrix<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let mut scale = SpdMatrix::new(start.clone())?;
    for _ in 0..500 {
        let mut s = Matrix::zeros(d, d);
        for i in 0..n {
            let xi = x.row(i);
            let w = (nu + d as f64) / (nu + scale.inv_quad(xi));
            s.add_outer(w / n as f64, xi, xi);
        }
        s.symmetrize();
        let change = s.max_abs_diff(scale.matrix());
        scale = SpdMatrix::with_jitter(s)?;
        if change < 1e-9 {
            break;
        }
    }
    Ok(scale)
}

/// Fit a normal or t copula to U-space data. The t copula profiles the
/// log-likelihood over integer dof `1..=lambda0`.
pub fn fit_parametric_copula(
    u: &DataMatrix,
    kind: CopulaKind,
    marginals: Vec<MarginalModel>,
    lambda0: u32,
) -> Result<ParametricCopulaModel> {
    let (n, d) = (u.nrows(), u.ncols());
    if marginals.len() != d {
        return Err(Error::Usage(format!("{} marginal models for {d} columns", marginals.len())));
    }
    if n < 2 {
        return Err(Error::Data("need at least two rows".into()));
    }
    let cov = |x: &Matrix<f64>| {
        let mean: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
        let mut s = Matrix::zeros(d, d);
        for i in 0..n {
            let r: Vec<f64> = x.row(i).iter().zip(&mean).map(|(a, b)| a - b).collect();
            s.add_outer(1.0 / n as f64, &r, &r);
        }
        s
    };
    match kind {
        CopulaKind::Normal => {
            let x = x_matrix(u, None)?;
            let r = spd_correlation(&cov(&x))?;
            ParametricCopulaModel::new(kind, r.into_matrix(), None, marginals)
        }
        CopulaKind::T => {
            if lambda0 == 0 {
                return Err(Error::Usage("lambda0 must be positive".into()));
            }
            let mut best: Option<(f64, u32, SpdMatrix<f64>)> = None;
            for nu in 1..=lambda0 {
                let x = x_matrix(u, Some(nu))?;
                let start = to_correlation(&cov(&x));
                let scale = t_scale_em(&x, nu as f64, &start)?;
                let r = spd_correlation(scale.matrix())?;
                let ll: f64 = (0..n)
                    .map(|i| copula_log_density(kind, Some(nu), &r, x.row(i)))
                    .sum();
                if ll.is_finite() && best.as_ref().is_none_or(|b| ll > b.0) {
                    best = Some((ll, nu, r));
                }
            }
            let (_, nu, r) = best.ok_or_else(|| Error::fit("no finite t copula likelihood", Vec::new()))?;
            ParametricCopulaModel::new(kind, r.into_matrix(), Some(nu), marginals)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_diagonal_enforced() {
        let m = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.9]]);
        let f = vec![MarginalModel::Normal { mean: 0.0, sd: 1.0 }; 2];
        assert!(ParametricCopulaModel::new(CopulaKind::Normal, m, None, f).is_err());
    }

    #[test]
    fn independence_copula_density_is_zero() {
        let f = vec![MarginalModel::Normal { mean: 0.0, sd: 1.0 }; 3];
        let m = ParametricCopulaModel::new(CopulaKind::Normal, Matrix::identity(3), None, f).unwrap();
        assert!(m.copula_logpdf(&[0.2, 0.5, 0.9]).unwrap().abs() < 1e-12);
    }
}
