//! Full-covariance engine (MN and Mt) with a Dirichlet / Normal–Wishart
//! conjugate prior.
//!
//! Conventions. `q(T_j)` is Wishart with `τ_j` degrees of freedom and scale
//! matrix `Σ_j^{-1}`, so `E[T_j] = τ_j Σ_j^{-1}`. The prior has `τ^0 + 1`
//! degrees of freedom, which makes the posterior count `τ^0 + 1 + Σ_i q_ij`.
//! For the t family `q(w_ij)` is the conditional posterior of the precision
//! multiplier given `δ_i = j`; its entropy enters the responsibilities.

use std::f64::consts::{LN_2, PI};

use super::dof::{optimize_dof, significant};
use super::model::{Component, ComponentScale, MixtureModel};
use super::{Family, Priors};
use crate::data::Standardization;
use crate::error::{Error, Result};
use crate::numerics::special::{lgamma, psi, sum_lgamma_half};
use crate::numerics::{log_sum_exp, Matrix, SpdMatrix};

/// Entropy of a Gamma(shape, rate) distribution.
pub(crate) fn gamma_entropy(shape: f64, rate: f64) -> f64 {
    shape - rate.ln() + lgamma(shape) + (1.0 - shape) * psi(shape)
}

/// `E[log|T|]` under Wishart(τ, Σ^{-1}).
pub fn expected_log_det(tau: f64, sigma: &SpdMatrix<f64>) -> f64 {
    let d = sigma.dim();
    (1..=d).map(|h| psi(0.5 * (tau + 1.0 - h as f64))).sum::<f64>() + d as f64 * LN_2
        - sigma.log_det()
}

/// `E[w] = (ν/2 + d/2) / (ν/2 + z/2)`.
pub fn expected_w(nu: f64, d: usize, z: f64) -> f64 {
    (0.5 * nu + 0.5 * d as f64) / (0.5 * nu + 0.5 * z)
}

/// `E[log w] = Ψ(ν/2 + d/2) − ln(ν/2 + z/2)`.
pub fn expected_log_w(nu: f64, d: usize, z: f64) -> f64 {
    psi(0.5 * nu + 0.5 * d as f64) - (0.5 * nu + 0.5 * z).ln()
}

// ln of the Wishart normalizer without the π term.
fn ln_wishart_norm(log_det_sigma: f64, dof: f64, d: usize) -> f64 {
    0.5 * dof * log_det_sigma - 0.5 * dof * d as f64 * LN_2 - sum_lgamma_half(dof, d)
}

pub(crate) fn ln_dirichlet_norm(alpha: &[f64]) -> f64 {
    lgamma(alpha.iter().sum::<f64>()) - alpha.iter().map(|&a| lgamma(a)).sum::<f64>()
}

pub(crate) fn expected_log_pi(alpha: &[f64]) -> Vec<f64> {
    let s = psi(alpha.iter().sum::<f64>());
    alpha.iter().map(|&a| psi(a) - s).collect()
}

#[derive(Debug, Clone)]
pub struct FullState {
    t: bool,
    fixed_dof: bool,
    /// `q_ij`, n × K.
    pub resp: Matrix<f64>,
    pub alpha: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `μ_j^q`
    pub mean: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub sigma: Vec<SpdMatrix<f64>>,
    pub nu: Vec<u32>,
    /// Shape of `q(w_ij)`; shared across i.
    pub w_shape: Vec<f64>,
    /// Rate of `q(w_ij)`, n × K.
    pub w_rate: Matrix<f64>,
    /// `z_ij` at the current `q(μ_j, T_j)`, n × K.
    pub z: Matrix<f64>,
    pub elbo: f64,
}

impl FullState {
    /// Start from hard labels in `0..k`; `q(w)` starts at `E[w] = 1`.
    pub fn init(
        x: &Matrix<f64>,
        t: bool,
        labels: &[usize],
        k: usize,
        priors: &Priors,
        fixed_dof: Option<u32>,
    ) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        priors.validate(d)?;
        let mut resp = Matrix::zeros(n, k);
        for (i, &l) in labels.iter().enumerate() {
            resp[(i, l)] = 1.0;
        }
        let nu0 = fixed_dof.unwrap_or(priors.lambda0);
        let w_shape = vec![0.5 * nu0 as f64 + 0.5 * d as f64; k];
        let mut w_rate = Matrix::zeros(n, k);
        for i in 0..n {
            w_rate.row_mut(i).copy_from_slice(&w_shape);
        }
        let mut s = FullState {
            t,
            fixed_dof: fixed_dof.is_some(),
            resp,
            alpha: vec![0.0; k],
            kappa: vec![0.0; k],
            mean: vec![vec![0.0; d]; k],
            tau: vec![0.0; k],
            sigma: vec![SpdMatrix::identity(d); k],
            nu: vec![nu0; k],
            w_shape,
            w_rate,
            z: Matrix::zeros(n, k),
            elbo: f64::NEG_INFINITY,
        };
        s.update_alpha(priors);
        s.update_mean_precision(x, priors)?;
        if t {
            s.update_w();
        }
        s.elbo = s.compute_elbo(x, priors);
        Ok(s)
    }

    pub fn is_t(&self) -> bool {
        self.t
    }

    pub fn n_components(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    pub fn e_w(&self, i: usize, j: usize) -> f64 {
        if self.t {
            self.w_shape[j] / self.w_rate[(i, j)]
        } else {
            1.0
        }
    }

    fn compute_z(&self, x: &Matrix<f64>) -> Matrix<f64> {
        let d = self.dim() as f64;
        let k = self.n_components();
        let mut z = Matrix::zeros(x.rows(), k);
        let mut r = vec![0.0; x.cols()];
        for j in 0..k {
            for i in 0..x.rows() {
                for (rv, (xv, mv)) in r.iter_mut().zip(x.row(i).iter().zip(&self.mean[j])) {
                    *rv = xv - mv;
                }
                z[(i, j)] = self.tau[j] * self.sigma[j].inv_quad(&r) + d / self.kappa[j];
            }
        }
        z
    }

    // ℓ_ij: expected complete-data log joint of (x_i, δ_i = j, w_ij) plus the
    // entropy of q(w_ij | δ_i = j).
    fn log_terms(&self, z: &Matrix<f64>) -> Matrix<f64> {
        let (n, k) = (z.rows(), self.n_components());
        let d = self.dim() as f64;
        let elog_pi = expected_log_pi(&self.alpha);
        let mut out = Matrix::zeros(n, k);
        for j in 0..k {
            let base = elog_pi[j] + 0.5 * expected_log_det(self.tau[j], &self.sigma[j])
                - 0.5 * d * (2.0 * PI).ln();
            if self.t {
                let h = 0.5 * self.nu[j] as f64;
                let a = self.w_shape[j];
                let psi_a = psi(a);
                let dof_const = h * h.ln() - lgamma(h) + lgamma(a) + (1.0 - a) * psi_a + a;
                for i in 0..n {
                    let b = self.w_rate[(i, j)];
                    let elog_w = psi_a - b.ln();
                    let e_w = a / b;
                    out[(i, j)] = base + dof_const + (a - 1.0) * elog_w - (h + 0.5 * z[(i, j)]) * e_w
                        - b.ln();
                }
            } else {
                for i in 0..n {
                    out[(i, j)] = base - 0.5 * z[(i, j)];
                }
            }
        }
        out
    }

    pub fn update_resp(&mut self) {
        let l = self.log_terms(&self.z);
        for i in 0..l.rows() {
            let row = l.row(i);
            let lse = log_sum_exp(row);
            for (dst, &v) in self.resp.row_mut(i).iter_mut().zip(row) {
                *dst = (v - lse).exp();
            }
        }
    }

    pub fn update_alpha(&mut self, priors: &Priors) {
        for j in 0..self.n_components() {
            self.alpha[j] = priors.alpha0 + self.resp.column(j).iter().sum::<f64>();
        }
    }

    /// `q(w_ij) = G(ν_j/2 + d/2, ν_j/2 + z_ij/2)` at the cached `z`.
    pub fn update_w(&mut self) {
        let d = self.dim() as f64;
        for j in 0..self.n_components() {
            let h = 0.5 * self.nu[j] as f64;
            self.w_shape[j] = h + 0.5 * d;
            for i in 0..self.z.rows() {
                self.w_rate[(i, j)] = h + 0.5 * self.z[(i, j)];
            }
        }
    }

    /// Normal–Wishart block, then refresh `z`.
    pub fn update_mean_precision(&mut self, x: &Matrix<f64>, priors: &Priors) -> Result<()> {
        let (n, d) = (x.rows(), x.cols());
        let tau0 = priors.tau0(d);
        for j in 0..self.n_components() {
            let mut sw = 0.0;
            let mut sq = 0.0;
            let mut m = vec![0.0; d];
            let weights: Vec<f64> = (0..n).map(|i| self.resp[(i, j)] * self.e_w(i, j)).collect();
            for i in 0..n {
                sq += self.resp[(i, j)];
                sw += weights[i];
                for (mv, xv) in m.iter_mut().zip(x.row(i)) {
                    *mv += weights[i] * xv;
                }
            }
            let kappa = priors.kappa0 + sw;
            m.iter_mut().for_each(|v| *v /= kappa);
            let mut sigma = Matrix::identity(d).scaled(priors.sigma0);
            sigma.add_outer(priors.kappa0, &m, &m);
            let mut r = vec![0.0; d];
            for i in 0..n {
                for (rv, (xv, mv)) in r.iter_mut().zip(x.row(i).iter().zip(&m)) {
                    *rv = xv - mv;
                }
                sigma.add_outer(weights[i], &r, &r);
            }
            sigma.symmetrize();
            self.sigma[j] = SpdMatrix::with_jitter(sigma)?;
            self.kappa[j] = kappa;
            self.mean[j] = m;
            self.tau[j] = tau0 + 1.0 + sq;
        }
        self.z = self.compute_z(x);
        Ok(())
    }

    /// Integer dof step on the collapsed bound, then refresh `q(w)`.
    pub fn update_dof(&mut self, priors: &Priors) {
        let d = self.dim() as f64;
        for j in 0..self.n_components() {
            let resp = self.resp.column(j);
            let rate: Vec<f64> = self.z.column(j).iter().map(|z| 0.5 * z).collect();
            let (resp, rate) = significant(&resp, &rate);
            self.nu[j] = optimize_dof(&resp, 0.5 * d, &rate, priors.lambda0);
        }
        self.update_w();
    }

    pub fn sweep(&mut self, x: &Matrix<f64>, priors: &Priors, update_dof: bool) -> Result<()> {
        self.update_resp();
        self.update_alpha(priors);
        if self.t {
            self.update_w();
        }
        self.update_mean_precision(x, priors)?;
        if self.t && update_dof && !self.fixed_dof {
            self.update_dof(priors);
        }
        self.elbo = self.compute_elbo(x, priors);
        if !self.elbo.is_finite() {
            return Err(Error::fit("evidence lower bound is not finite", vec![self.elbo]));
        }
        Ok(())
    }

    /// Evidence lower bound of the current state on `x`.
    pub fn compute_elbo(&self, x: &Matrix<f64>, priors: &Priors) -> f64 {
        let d = x.cols();
        let df = d as f64;
        let k = self.n_components();
        let z = self.compute_z(x);
        let l = self.log_terms(&z);
        let mut total = 0.0;
        for i in 0..l.rows() {
            for j in 0..k {
                let q = self.resp[(i, j)];
                if q > 0.0 {
                    total += q * (l[(i, j)] - q.ln());
                }
            }
        }

        let alpha0 = vec![priors.alpha0; k];
        let elog_pi = expected_log_pi(&self.alpha);
        total += ln_dirichlet_norm(&alpha0) - ln_dirichlet_norm(&self.alpha);
        total += (0..k).map(|j| (alpha0[j] - self.alpha[j]) * elog_pi[j]).sum::<f64>();

        let nu0 = priors.tau0(d) + 1.0;
        let ln_b0 = ln_wishart_norm(df * priors.sigma0.ln(), nu0, d);
        for j in 0..k {
            let (kappa, tau, sigma) = (self.kappa[j], self.tau[j], &self.sigma[j]);
            let inv = sigma.inverse();
            let elogdet = expected_log_det(tau, sigma);
            total += 0.5 * df * (priors.kappa0 / kappa).ln()
                - 0.5 * priors.kappa0 * (df / kappa + tau * sigma.inv_quad(&self.mean[j]))
                + 0.5 * df;
            total += ln_b0 - ln_wishart_norm(sigma.log_det(), tau, d) + 0.5 * (nu0 - tau) * elogdet
                - 0.5 * tau * priors.sigma0 * inv.trace()
                + 0.5 * tau * df;
        }
        // A pinned ν is a hyperparameter, not a draw from the uniform prior.
        if self.t && !self.fixed_dof {
            total -= k as f64 * (priors.lambda0 as f64).ln();
        }
        total
    }

    pub fn occupancy(&self) -> Vec<f64> {
        (0..self.n_components())
            .map(|j| self.resp.column(j).iter().sum())
            .collect()
    }

    /// Drop component `j` and renormalize the responsibilities.
    pub fn remove_component(&mut self, j: usize) {
        self.resp = renormalized(self.resp.without_columns(&[j]));
        self.w_rate = self.w_rate.without_columns(&[j]);
        self.z = self.z.without_columns(&[j]);
        self.alpha.remove(j);
        self.kappa.remove(j);
        self.mean.remove(j);
        self.tau.remove(j);
        self.sigma.remove(j);
        self.nu.remove(j);
        self.w_shape.remove(j);
        self.elbo = f64::NEG_INFINITY;
    }

    pub(crate) fn main_params(&self) -> Vec<Vec<f64>> {
        (0..self.n_components())
            .map(|j| {
                let mut v = self.mean[j].clone();
                v.extend(self.sigma[j].matrix().as_slice().iter().map(|s| s / self.tau[j]));
                v
            })
            .collect()
    }

    /// Plug-in mixture: weights `α/Σα`, locations `μ^q`, scales `Σ/τ`.
    pub fn to_model(&self, standardization: Standardization) -> Result<MixtureModel> {
        let total: f64 = self.alpha.iter().sum();
        let weights = self.alpha.iter().map(|a| a / total).collect();
        let components = (0..self.n_components())
            .map(|j| Component {
                location: self.mean[j].clone(),
                scale: ComponentScale::Full {
                    matrix: self.sigma[j].matrix().scaled(1.0 / self.tau[j]),
                },
                dof: self.t.then_some(self.nu[j]),
            })
            .collect();
        let family = if self.t { Family::Mt } else { Family::MN };
        MixtureModel::new(family, weights, components, standardization)
    }
}

pub(crate) fn renormalized(mut resp: Matrix<f64>) -> Matrix<f64> {
    let k = resp.cols();
    for i in 0..resp.rows() {
        let row = resp.row_mut(i);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
        }
    }
    resp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_entropy_matches_statrs() {
        use statrs::distribution::Gamma;
        use statrs::statistics::Distribution;
        let g = Gamma::new(2.5, 0.7).unwrap();
        assert!((gamma_entropy(2.5, 0.7) - g.entropy().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn single_point_mean_update() {
        let x = Matrix::from_rows(&[vec![0.7, -1.2]]);
        let priors = Priors::default();
        let s = FullState::init(&x, false, &[0], 1, &priors, None).unwrap();
        let expect = 1.0 / (priors.kappa0 + 1.0);
        assert!((s.mean[0][0] - 0.7 * expect).abs() < 1e-14);
        assert!((s.mean[0][1] + 1.2 * expect).abs() < 1e-14);
    }
}
