//! Multivariate normal and Student t log-densities.

use super::linalg::SpdMatrix;
use super::special::lgamma;
use super::Real;

fn residual<T: Real>(x: &[T], mu: &[T], dim: usize) -> Vec<T> {
    assert!(
        x.len() == dim && mu.len() == dim,
        "dimension mismatch: x has {}, mu has {}, scale is {dim}x{dim}",
        x.len(),
        mu.len()
    );
    x.iter().zip(mu).map(|(&a, &b)| a - b).collect()
}

/// `ln N_d(x; mu, V)` through the cached Cholesky factor of `V`.
pub fn mvn_logpdf<T: Real>(x: &[T], mu: &[T], v: &SpdMatrix<T>) -> T {
    let d = v.dim();
    let r = residual(x, mu, d);
    let maha = v.inv_quad(&r);
    -T::half() * (T::from_count(d) * T::c((2.0 * std::f64::consts::PI).ln()) + v.log_det() + maha)
}

/// `ln t_d(x; mu, V, nu)` with `V` the scale (not covariance) matrix.
pub fn mvt_logpdf<T: Real>(x: &[T], mu: &[T], v: &SpdMatrix<T>, nu: T) -> T {
    assert!(nu > T::zero(), "degrees of freedom must be positive");
    let d = v.dim();
    let r = residual(x, mu, d);
    let maha = v.inv_quad(&r);
    let half = T::half();
    let dt = T::from_count(d);
    lgamma(half * (nu + dt)) - lgamma(half * nu) - half * dt * (nu * T::PI()).ln()
        - half * v.log_det()
        - half * (nu + dt) * (maha / nu).ln_1p()
}
