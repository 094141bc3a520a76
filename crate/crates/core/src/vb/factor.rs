//! Factor-analyzer engine (MFA and MtFA).
//!
//! Component j: `x | z, w ~ N(μ_j + Λ_j z, (w ψ_j)^{-1} I)`,
//! `z | w ~ N(0, w^{-1} I)`, with ARD gamma priors on the loading column
//! precisions `τ_jl`, a gamma prior on `ψ_j` and a wide normal prior
//! `N(0, s0² I)` on `μ_j`. `q(z_ij)` has covariance `s_ij M_j` where
//! `M_j = (I + [ψ_j][Λ_j'Λ_j])^{-1}` and `s_ij = 1/[w_ij]` at the time of
//! the update.

use std::f64::consts::PI;

use super::dof::{optimize_dof, significant};
use super::full::{expected_log_pi, gamma_entropy, ln_dirichlet_norm, renormalized};
use super::model::{Component, ComponentScale, MixtureModel};
use super::{Family, Priors};
use crate::data::Standardization;
use crate::error::{Error, Result};
use crate::numerics::special::{lgamma, psi};
use crate::numerics::{dot, symmetric_eigen, Matrix, SpdMatrix};

/// Largest factor count identifiable in a d-variate factor model,
/// `⌊(2d + 1 − √(8d + 1)) / 2⌋`.
pub fn initial_factor_count(d: usize) -> usize {
    let d = d as f64;
    ((2.0 * d + 1.0 - (8.0 * d + 1.0).sqrt()) / 2.0 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone)]
pub struct FactorState {
    t: bool,
    fixed_dof: bool,
    pub resp: Matrix<f64>,
    pub alpha: Vec<f64>,
    /// `μ_{μ_j}` and `σ²_{μ_j}`
    pub mu_mean: Vec<Vec<f64>>,
    pub mu_var: Vec<f64>,
    /// `[Λ_j]`, d × k_j, and the per-column variances `σ²_{Λ_jl}`.
    pub load_mean: Vec<Matrix<f64>>,
    pub load_var: Vec<Vec<f64>>,
    pub tau_shape: Vec<Vec<f64>>,
    pub tau_rate: Vec<Vec<f64>>,
    pub psi_shape: Vec<f64>,
    pub psi_rate: Vec<f64>,
    pub nu: Vec<u32>,
    pub w_shape: Vec<f64>,
    pub w_rate: Matrix<f64>,
    m_mat: Vec<Matrix<f64>>,
    m_logdet: Vec<f64>,
    /// `μ_{x_ij}`, one n × k_j matrix per component.
    z_mean: Vec<Matrix<f64>>,
    z_scale: Matrix<f64>,
    pub elbo: f64,
}

// Per-(i, j) sufficient quantities at the current q.
struct Moments {
    c: f64,
    ezz: f64,
}

impl FactorState {
    pub fn init(
        x: &Matrix<f64>,
        t: bool,
        labels: &[usize],
        k: usize,
        factors: usize,
        priors: &Priors,
        fixed_dof: Option<u32>,
    ) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        priors.validate(d)?;
        let kf = factors.min(d.saturating_sub(1));
        let mut resp = Matrix::zeros(n, k);
        for (i, &l) in labels.iter().enumerate() {
            resp[(i, l)] = 1.0;
        }
        let nu0 = fixed_dof.unwrap_or(priors.lambda0);
        let mut s = FactorState {
            t,
            fixed_dof: fixed_dof.is_some(),
            resp,
            alpha: vec![0.0; k],
            mu_mean: Vec::with_capacity(k),
            mu_var: Vec::with_capacity(k),
            load_mean: Vec::with_capacity(k),
            load_var: Vec::with_capacity(k),
            tau_shape: Vec::with_capacity(k),
            tau_rate: Vec::with_capacity(k),
            psi_shape: Vec::with_capacity(k),
            psi_rate: Vec::with_capacity(k),
            nu: vec![nu0; k],
            w_shape: vec![0.5 * (nu0 as f64 + (d + kf) as f64); k],
            w_rate: Matrix::zeros(n, k),
            m_mat: Vec::new(),
            m_logdet: Vec::new(),
            z_mean: Vec::new(),
            z_scale: Matrix::zeros(n, k),
            elbo: f64::NEG_INFINITY,
        };
        for j in 0..k {
            for i in 0..n {
                s.w_rate[(i, j)] = s.w_shape[j];
            }
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
            let nj = members.len() as f64;
            let mut m = vec![0.0; d];
            for &i in &members {
                for (mv, xv) in m.iter_mut().zip(x.row(i)) {
                    *mv += xv / nj.max(1.0);
                }
            }
            // Covariance shrunk toward the identity (the data are standardized).
            let mut cov = Matrix::identity(d);
            let mut r = vec![0.0; d];
            for &i in &members {
                for (rv, (xv, mv)) in r.iter_mut().zip(x.row(i).iter().zip(&m)) {
                    *rv = xv - mv;
                }
                cov.add_outer(1.0, &r, &r);
            }
            let cov = cov.scaled(1.0 / (nj + 1.0));
            let (vals, vecs) = symmetric_eigen(&cov);
            let noise = if kf < d {
                (vals[kf..].iter().sum::<f64>() / (d - kf) as f64).max(1e-3)
            } else {
                1e-3
            };
            let loadings = Matrix::from_fn(d, kf, |a, l| {
                vecs[(a, l)] * (vals[l] - noise).max(1e-3).sqrt()
            });
            let tau_shape = vec![priors.gamma_a + 0.5 * d as f64; kf];
            let tau_rate = (0..kf)
                .map(|l| {
                    let norm2: f64 = loadings.column(l).iter().map(|v| v * v).sum();
                    tau_shape[l] * norm2 / d as f64
                })
                .collect();
            let psi_shape = priors.gamma_a + 0.5 * d as f64 * nj.max(1.0);
            s.alpha[j] = priors.alpha0 + nj;
            s.mu_mean.push(m);
            s.mu_var.push(noise / (nj + 1.0));
            s.load_mean.push(loadings);
            s.load_var.push(vec![1e-3; kf]);
            s.tau_shape.push(tau_shape);
            s.tau_rate.push(tau_rate);
            s.psi_shape.push(psi_shape);
            s.psi_rate.push(psi_shape * noise);
        }
        s.update_z(x)?;
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
        self.mu_mean.first().map_or(0, Vec::len)
    }

    pub fn factor_counts(&self) -> Vec<usize> {
        self.load_mean.iter().map(Matrix::cols).collect()
    }

    pub fn e_w(&self, i: usize, j: usize) -> f64 {
        if self.t {
            self.w_shape[j] / self.w_rate[(i, j)]
        } else {
            1.0
        }
    }

    fn e_psi(&self, j: usize) -> f64 {
        self.psi_shape[j] / self.psi_rate[j]
    }

    fn elog_psi(&self, j: usize) -> f64 {
        psi(self.psi_shape[j]) - self.psi_rate[j].ln()
    }

    /// `[Λ_j'Λ_j] = [Λ_j]'[Λ_j] + d·diag(σ²_Λ)`
    pub fn expected_ltl(&self, j: usize) -> Matrix<f64> {
        let lam = &self.load_mean[j];
        let mut g = lam.transpose().matmul(lam);
        let d = lam.rows() as f64;
        for (l, v) in self.load_var[j].iter().enumerate() {
            g[(l, l)] += d * v;
        }
        g
    }

    /// `q(z_ij)` for every observation.
    pub fn update_z(&mut self, x: &Matrix<f64>) -> Result<()> {
        let n = x.rows();
        let k = self.n_components();
        self.m_mat.clear();
        self.m_logdet.clear();
        self.z_mean.clear();
        for j in 0..k {
            let kf = self.load_mean[j].cols();
            let ep = self.e_psi(j);
            let (m, logdet) = if kf == 0 {
                (Matrix::zeros(0, 0), 0.0)
            } else {
                let mut prec = self.expected_ltl(j).scaled(ep);
                prec.add_diag(1.0);
                let spd = SpdMatrix::with_jitter(prec)?;
                (spd.inverse(), -spd.log_det())
            };
            let mut zm = Matrix::zeros(n, kf);
            if kf > 0 {
                let mut r = vec![0.0; x.cols()];
                for i in 0..n {
                    for (rv, (xv, mv)) in r.iter_mut().zip(x.row(i).iter().zip(&self.mu_mean[j])) {
                        *rv = xv - mv;
                    }
                    let proj = self.load_mean[j].tr_mul_vec(&r);
                    let v = m.mul_vec(&proj);
                    for (dst, src) in zm.row_mut(i).iter_mut().zip(v) {
                        *dst = ep * src;
                    }
                }
            }
            for i in 0..n {
                self.z_scale[(i, j)] = 1.0 / self.e_w(i, j);
            }
            self.m_mat.push(m);
            self.m_logdet.push(logdet);
            self.z_mean.push(zm);
        }
        Ok(())
    }

    fn moments(&self, x: &Matrix<f64>) -> Vec<Vec<Moments>> {
        let d = x.cols() as f64;
        (0..self.n_components())
            .map(|j| {
                let lam = &self.load_mean[j];
                let ltl = self.expected_ltl(j);
                let kf = lam.cols();
                let (tr_m, tr_mltl) = if kf == 0 {
                    (0.0, 0.0)
                } else {
                    (self.m_mat[j].trace(), self.m_mat[j].matmul(&ltl).trace())
                };
                let mut r = vec![0.0; x.cols()];
                (0..x.rows())
                    .map(|i| {
                        for (rv, (xv, mv)) in r.iter_mut().zip(x.row(i).iter().zip(&self.mu_mean[j])) {
                            *rv = xv - mv;
                        }
                        let mx = self.z_mean[j].row(i);
                        let s = self.z_scale[(i, j)];
                        let mut c = dot(&r, &r) + d * self.mu_var[j];
                        if kf > 0 {
                            let lmx = lam.mul_vec(mx);
                            c += -2.0 * dot(&r, &lmx) + dot(mx, &ltl.mul_vec(mx)) + s * tr_mltl;
                        }
                        Moments {
                            c,
                            ezz: dot(mx, mx) + s * tr_m,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `q(w_ij)` given the current `q(z_ij)` and parameters.
    pub fn update_w(&mut self, x: &Matrix<f64>) {
        let mom = self.moments(x);
        let d = x.cols() as f64;
        for j in 0..self.n_components() {
            let h = 0.5 * self.nu[j] as f64;
            let ep = self.e_psi(j);
            self.w_shape[j] = h + 0.5 * (d + self.load_mean[j].cols() as f64);
            for (i, m) in mom[j].iter().enumerate() {
                self.w_rate[(i, j)] = h + 0.5 * ep * m.c + 0.5 * m.ezz;
            }
        }
    }

    fn log_terms(&self, x: &Matrix<f64>) -> Matrix<f64> {
        let (n, d) = (x.rows(), x.cols() as f64);
        let mom = self.moments(x);
        let elog_pi = expected_log_pi(&self.alpha);
        let mut out = Matrix::zeros(n, self.n_components());
        for j in 0..self.n_components() {
            let kf = self.load_mean[j].cols() as f64;
            let ep = self.e_psi(j);
            let base = elog_pi[j] + 0.5 * d * self.elog_psi(j) - 0.5 * (d + kf) * (2.0 * PI).ln()
                + 0.5 * kf * (1.0 + (2.0 * PI).ln())
                + 0.5 * self.m_logdet[j];
            let h = 0.5 * self.nu[j] as f64;
            let a = self.w_shape[j];
            let psi_a = psi(a);
            // h ln h − ln Γ(h) plus the b-free part of the entropy of q(w)
            let dof_const = h * h.ln() - lgamma(h) + a + lgamma(a) + (1.0 - a) * psi_a;
            for i in 0..n {
                let m = &mom[j][i];
                let s = self.z_scale[(i, j)];
                out[(i, j)] = base + 0.5 * kf * s.ln()
                    + if self.t {
                        let b = self.w_rate[(i, j)];
                        (a - 1.0) * (psi_a - b.ln()) - (h + 0.5 * ep * m.c + 0.5 * m.ezz) * (a / b)
                            + dof_const
                            - b.ln()
                    } else {
                        -0.5 * ep * m.c - 0.5 * m.ezz
                    };
            }
        }
        out
    }

    pub fn update_resp(&mut self, x: &Matrix<f64>) {
        let l = self.log_terms(x);
        for i in 0..l.rows() {
            let row = l.row(i);
            let lse = crate::numerics::log_sum_exp(row);
            for (dst, &v) in self.resp.row_mut(i).iter_mut().zip(row) {
                *dst = (v - lse).exp();
            }
        }
    }

    fn update_alpha(&mut self, priors: &Priors) {
        for j in 0..self.n_components() {
            self.alpha[j] = priors.alpha0 + self.resp.column(j).iter().sum::<f64>();
        }
    }

    fn update_mu(&mut self, x: &Matrix<f64>, priors: &Priors) {
        let d = x.cols();
        for j in 0..self.n_components() {
            let ep = self.e_psi(j);
            let mut sw = 0.0;
            let mut acc = vec![0.0; d];
            for i in 0..x.rows() {
                let wq = self.resp[(i, j)] * self.e_w(i, j);
                sw += wq;
                let lmx = if self.load_mean[j].cols() > 0 {
                    self.load_mean[j].mul_vec(self.z_mean[j].row(i))
                } else {
                    vec![0.0; d]
                };
                for a in 0..d {
                    acc[a] += wq * (x[(i, a)] - lmx[a]);
                }
            }
            let var = 1.0 / (1.0 / priors.mu_prior_var + ep * sw);
            self.mu_var[j] = var;
            self.mu_mean[j] = acc.iter().map(|v| var * ep * v).collect();
        }
    }

    fn update_loadings(&mut self, x: &Matrix<f64>) {
        let d = x.cols();
        for j in 0..self.n_components() {
            let kf = self.load_mean[j].cols();
            if kf == 0 {
                continue;
            }
            let ep = self.e_psi(j);
            let mut szz = Matrix::zeros(kf, kf);
            let mut sxz = Matrix::zeros(d, kf);
            let mut r = vec![0.0; d];
            let mut qs = 0.0;
            for i in 0..x.rows() {
                let q = self.resp[(i, j)];
                let wq = q * self.e_w(i, j);
                qs += wq * self.z_scale[(i, j)];
                let mx = self.z_mean[j].row(i);
                for (rv, (xv, mv)) in r.iter_mut().zip(x.row(i).iter().zip(&self.mu_mean[j])) {
                    *rv = xv - mv;
                }
                szz.add_outer(wq, mx, mx);
                sxz.add_outer(wq, &r, mx);
            }
            let m = &self.m_mat[j];
            for a in 0..kf {
                for b in 0..kf {
                    szz[(a, b)] += qs * m[(a, b)];
                }
            }
            for l in 0..kf {
                let etau = self.tau_shape[j][l] / self.tau_rate[j][l];
                let var = 1.0 / (etau + ep * szz[(l, l)]);
                let mut col: Vec<f64> = (0..d).map(|a| sxz[(a, l)]).collect();
                for s in (0..kf).filter(|&s| s != l) {
                    for (a, cv) in col.iter_mut().enumerate() {
                        *cv -= self.load_mean[j][(a, s)] * szz[(l, s)];
                    }
                }
                for (a, cv) in col.iter().enumerate() {
                    self.load_mean[j][(a, l)] = var * ep * cv;
                }
                self.load_var[j][l] = var;
            }
        }
    }

    fn update_tau(&mut self, priors: &Priors) {
        for j in 0..self.n_components() {
            let d = self.load_mean[j].rows() as f64;
            for l in 0..self.load_mean[j].cols() {
                let norm2: f64 = self.load_mean[j].column(l).iter().map(|v| v * v).sum();
                self.tau_shape[j][l] = priors.gamma_a + 0.5 * d;
                self.tau_rate[j][l] = priors.gamma_b + 0.5 * (norm2 + d * self.load_var[j][l]);
            }
        }
    }

    fn update_psi(&mut self, x: &Matrix<f64>, priors: &Priors) {
        let mom = self.moments(x);
        let d = x.cols() as f64;
        for j in 0..self.n_components() {
            let mut sq = 0.0;
            let mut sc = 0.0;
            for (i, m) in mom[j].iter().enumerate() {
                let q = self.resp[(i, j)];
                sq += q;
                sc += q * self.e_w(i, j) * m.c;
            }
            self.psi_shape[j] = priors.gamma_a + 0.5 * d * sq;
            self.psi_rate[j] = priors.gamma_b + 0.5 * sc;
        }
    }

    fn update_dof(&mut self, x: &Matrix<f64>, priors: &Priors) {
        let mom = self.moments(x);
        let d = x.cols() as f64;
        for j in 0..self.n_components() {
            let ep = self.e_psi(j);
            let shape = 0.5 * (d + self.load_mean[j].cols() as f64);
            let rate: Vec<f64> = mom[j].iter().map(|m| 0.5 * ep * m.c + 0.5 * m.ezz).collect();
            let (resp, rate) = significant(&self.resp.column(j), &rate);
            self.nu[j] = optimize_dof(&resp, shape, &rate, priors.lambda0);
        }
        self.update_w(x);
    }

    pub fn sweep(&mut self, x: &Matrix<f64>, priors: &Priors, update_dof: bool) -> Result<()> {
        self.update_z(x)?;
        if self.t {
            self.update_w(x);
        }
        self.update_resp(x);
        self.update_alpha(priors);
        self.update_mu(x, priors);
        self.update_loadings(x);
        self.update_tau(priors);
        self.update_psi(x, priors);
        if self.t && update_dof && !self.fixed_dof {
            self.update_dof(x, priors);
        }
        self.elbo = self.compute_elbo(x, priors);
        if !self.elbo.is_finite() {
            return Err(Error::fit("evidence lower bound is not finite", vec![self.elbo]));
        }
        Ok(())
    }

    pub fn compute_elbo(&self, x: &Matrix<f64>, priors: &Priors) -> f64 {
        let d = x.cols() as f64;
        let k = self.n_components();
        let l = self.log_terms(x);
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

        let (a0, b0) = (priors.gamma_a, priors.gamma_b);
        let gamma_kl = |shape: f64, rate: f64| {
            // E log G(v | a0, b0) + H(q(v))
            let elog = psi(shape) - rate.ln();
            a0 * b0.ln() - lgamma(a0) + (a0 - 1.0) * elog - b0 * shape / rate
                + gamma_entropy(shape, rate)
        };
        let s0 = priors.mu_prior_var;
        for j in 0..k {
            let m2: f64 = self.mu_mean[j].iter().map(|v| v * v).sum();
            let v = self.mu_var[j];
            total += -0.5 * d * s0.ln() - (m2 + d * v) / (2.0 * s0) + 0.5 * d * v.ln() + 0.5 * d;
            for l in 0..self.load_mean[j].cols() {
                let (ta, tb) = (self.tau_shape[j][l], self.tau_rate[j][l]);
                let norm2: f64 = self.load_mean[j].column(l).iter().map(|v| v * v).sum();
                let sv = self.load_var[j][l];
                total += 0.5 * d * (psi(ta) - tb.ln()) - 0.5 * (ta / tb) * (norm2 + d * sv)
                    + 0.5 * d * sv.ln()
                    + 0.5 * d;
                total += gamma_kl(ta, tb);
            }
            total += gamma_kl(self.psi_shape[j], self.psi_rate[j]);
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

    pub fn remove_component(&mut self, j: usize) {
        self.resp = renormalized(self.resp.without_columns(&[j]));
        self.w_rate = self.w_rate.without_columns(&[j]);
        self.z_scale = self.z_scale.without_columns(&[j]);
        self.alpha.remove(j);
        self.mu_mean.remove(j);
        self.mu_var.remove(j);
        self.load_mean.remove(j);
        self.load_var.remove(j);
        self.tau_shape.remove(j);
        self.tau_rate.remove(j);
        self.psi_shape.remove(j);
        self.psi_rate.remove(j);
        self.nu.remove(j);
        self.w_shape.remove(j);
        self.m_mat.remove(j);
        self.m_logdet.remove(j);
        self.z_mean.remove(j);
        self.elbo = f64::NEG_INFINITY;
    }

    /// Drop loading columns with `b_τ/(a_τ − 1) < ε`.
    pub fn prune_factors(&mut self, x: &Matrix<f64>, priors: &Priors) -> bool {
        let mut any = false;
        for j in 0..self.n_components() {
            let drop: Vec<usize> = (0..self.load_mean[j].cols())
                .filter(|&l| {
                    let a = self.tau_shape[j][l];
                    a > 1.0 && self.tau_rate[j][l] / (a - 1.0) < priors.epsilon
                })
                .collect();
            if drop.is_empty() {
                continue;
            }
            any = true;
            let keep = |v: &Vec<f64>| -> Vec<f64> {
                v.iter()
                    .enumerate()
                    .filter(|(l, _)| !drop.contains(l))
                    .map(|(_, &x)| x)
                    .collect()
            };
            self.load_mean[j] = self.load_mean[j].without_columns(&drop);
            self.z_mean[j] = self.z_mean[j].without_columns(&drop);
            self.load_var[j] = keep(&self.load_var[j]);
            self.tau_shape[j] = keep(&self.tau_shape[j]);
            self.tau_rate[j] = keep(&self.tau_rate[j]);
        }
        if any {
            // M_j and q(z) must match the new shapes before anything reads them.
            self.update_z(x).expect("factor precision stays positive definite after pruning");
            if self.t {
                self.update_w(x);
            }
            self.elbo = self.compute_elbo(x, priors);
        }
        any
    }

    pub(crate) fn main_params(&self) -> Vec<Vec<f64>> {
        (0..self.n_components())
            .map(|j| {
                let mut v = self.mu_mean[j].clone();
                v.extend_from_slice(self.load_mean[j].as_slice());
                v
            })
            .collect()
    }

    pub fn to_model(&self, standardization: Standardization) -> Result<MixtureModel> {
        let total: f64 = self.alpha.iter().sum();
        let weights = self.alpha.iter().map(|a| a / total).collect();
        let components = (0..self.n_components())
            .map(|j| Component {
                location: self.mu_mean[j].clone(),
                scale: ComponentScale::Factor {
                    loadings: self.load_mean[j].clone(),
                    noise_precision: self.e_psi(j),
                },
                dof: self.t.then_some(self.nu[j]),
            })
            .collect();
        let family = if self.t { Family::MtFA } else { Family::MFA };
        MixtureModel::new(family, weights, components, standardization)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_factor_counts() {
        let expect = [(1, 0), (2, 0), (3, 1), (4, 1), (5, 2), (6, 3), (13, 8), (40, 31)];
        for (d, k) in expect {
            assert_eq!(initial_factor_count(d), k, "d={d}");
        }
    }
}
