#![allow(dead_code)]

use ctmix::numerics::Matrix;
use ctmix::seed::rng;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub type Dense = Vec<Vec<f64>>;

/// Gauss-Jordan inverse with partial pivoting, plus the determinant.
pub fn gauss_jordan(m: &Dense) -> (Dense, f64) {
    let n = m.len();
    let mut a = m.clone();
    let mut inv: Dense = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if p != c {
            a.swap(p, c);
            inv.swap(p, c);
            det = -det;
        }
        let piv = a[c][c];
        det *= piv;
        for k in 0..n {
            a[c][k] /= piv;
            inv[c][k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for k in 0..n {
                    a[r][k] -= f * a[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    (inv, det)
}

pub fn to_dense(m: &Matrix<f64>) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Two well separated t5 clusters with correlated scales.
pub fn t_mixture_sample(n: usize, d: usize, seed: u64) -> Matrix<f64> {
    let mut r = rng(seed);
    let gamma = Gamma::new(2.5, 1.0 / 2.5).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let j = usize::from(r.random::<f64>() < 0.4);
            let w: f64 = gamma.sample(&mut r);
            let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
            let sign = if j == 0 { 1.0 } else { -1.0 };
            (0..d)
                .map(|a| {
                    // lower-triangular factor with 0.5 off the diagonal
                    let v = e[a] + if a > 0 { 0.5 * e[a - 1] } else { 0.0 };
                    sign * 1.5 + v / w.sqrt()
                })
                .collect()
        })
        .collect();
    Matrix::from_rows(&rows)
}

/// `x = μ + λ f + e`, `f ~ N(0, 1)`, `e ~ N(0, σ² I)`.
pub fn one_factor_sample(n: usize, lambda: &[f64], noise_sd: f64, seed: u64) -> Matrix<f64> {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let f: f64 = StandardNormal.sample(&mut r);
            lambda
                .iter()
                .enumerate()
                .map(|(a, l)| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    a as f64 + l * f + noise_sd * e
                })
                .collect()
        })
        .collect();
    Matrix::from_rows(&rows)
}
