use rand::Rng;
use rand_distr::StandardNormal;

use crate::copula::CopulaTypeModel;
use crate::data::{DataMatrix, Standardization};
use crate::error::Result;
use crate::marginals::{implied_marginal, MarginalModel};
use crate::numerics::{clamp_probability, Matrix, SpdMatrix, UnivariateCdf};
use crate::seed::rng;
use crate::vb::{Component, ComponentScale, Family, MixtureModel};

/// Equal-weight two-component normal mixture in X-space, mapped to Y-space
/// through its own marginals `G_j` and target marginals `F_j`.
#[derive(Debug, Clone)]
pub struct Dgp {
    pub mixture: MixtureModel,
    pub marginals: Vec<MarginalModel>,
    g_marginals: Vec<MarginalModel>,
    chol: Vec<Matrix<f64>>,
}

impl Dgp {
    pub fn new(means: [Vec<f64>; 2], covs: [Matrix<f64>; 2], marginals: Vec<MarginalModel>) -> Result<Self> {
        let d = marginals.len();
        let chol = covs
            .iter()
            .map(|c| SpdMatrix::new(c.clone()).map(|s| s.chol().clone()))
            .collect::<Result<Vec<_>>>()?;
        let comps = means
            .into_iter()
            .zip(covs)
            .map(|(m, c)| Component {
                location: m,
                scale: ComponentScale::Full { matrix: c },
                dof: None,
            })
            .collect();
        let mixture = MixtureModel::new(Family::MN, vec![0.5, 0.5], comps, Standardization::identity(d))?;
        let g_marginals = (0..d).map(|j| implied_marginal(&mixture, j)).collect::<Result<_>>()?;
        Ok(Dgp {
            mixture,
            marginals,
            g_marginals,
            chol,
        })
    }

    /// `μ = ∓2·1`, `V_1 = 0.5^{|i−j|}`, `V_2 = (−0.5)^{|i−j|}`, all
    /// marginals `t(0, 1, 5)`.
    pub fn standard(d: usize) -> Result<Self> {
        let v = |r: f64| Matrix::from_fn(d, d, |i, j| r.powi((i as i32 - j as i32).abs()));
        Dgp::new(
            [vec![-2.0; d], vec![2.0; d]],
            [v(0.5), v(-0.5)],
            vec![MarginalModel::StudentT { loc: 0.0, scale: 1.0, nu: 5.0 }; d],
        )
    }

    /// Bivariate example: correlations `±0.6` at `±(2, 2)`, marginals
    /// `N(1, 3)` (variance 3) and `t(0, 1, 5)`.
    pub fn motivating() -> Result<Self> {
        let v = |r: f64| Matrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]);
        Dgp::new(
            [vec![2.0, 2.0], vec![-2.0, -2.0]],
            [v(0.6), v(-0.6)],
            vec![
                MarginalModel::Normal { mean: 1.0, sd: 3f64.sqrt() },
                MarginalModel::StudentT { loc: 0.0, scale: 1.0, nu: 5.0 },
            ],
        )
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Generating marginals `F_j` of Y.
    pub fn marginals(&self) -> &[MarginalModel] {
        &self.marginals
    }

    /// Marginals `G_j` of the X-space mixture.
    pub fn g_marginals(&self) -> &[MarginalModel] {
        &self.g_marginals
    }

    pub fn sample_x(&self, n: usize, seed: u64) -> DataMatrix {
        let d = self.dim();
        let mut r = rng(seed);
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            let k = usize::from(r.random::<f64>() >= 0.5);
            let z: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
            let lz = self.chol[k].mul_vec(&z);
            let loc = &self.mixture.components()[k].location;
            for j in 0..d {
                out[(i, j)] = loc[j] + lz[j];
            }
        }
        DataMatrix::new(out).expect("finite draws")
    }

    /// `u_ij = G_j(x_ij)`.
    pub fn x_to_u(&self, x: &DataMatrix) -> DataMatrix {
        let m = Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            clamp_probability(self.g_marginals[j].cdf(x.row(i)[j]))
        });
        DataMatrix::new(m).expect("probabilities are finite")
    }

    pub fn u_to_y(&self, u: &DataMatrix) -> Result<DataMatrix> {
        let rows = u
            .rows()
            .map(|row| {
                row.iter()
                    .zip(&self.marginals)
                    .map(|(&p, f)| f.quantile(p))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DataMatrix::from_rows(&rows)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<DataMatrix> {
        self.u_to_y(&self.x_to_u(&self.sample_x(n, seed)))
    }

    /// The generating density as a copula-type model with `H_j = G_j`.
    pub fn true_density(&self) -> Result<CopulaTypeModel> {
        CopulaTypeModel::new(self.marginals.clone(), self.g_marginals.clone(), self.mixture.clone())
    }
}

pub fn simulate_dgp(d: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    Dgp::standard(d)?.sample(n, seed)
}

pub fn simulate_motivating(n: usize, seed: u64) -> Result<DataMatrix> {
    Dgp::motivating()?.sample(n, seed)
}
