//! Numeric kernels shared by every other module: special functions, dense
//! linear algebra, multivariate log-densities and cdf inversion.
//!
//! Everything here is generic over [`Real`] so the kernels can be used with
//! `f32` or `f64`; the fitting engines instantiate them at `f64`.

pub mod density;
pub mod invert;
pub mod linalg;
mod scalar;
pub mod special;
pub mod univariate;

pub use density::{mvn_logpdf, mvt_logpdf};
pub use invert::{brent_root, clamp_probability, invert_cdf, PROB_CLAMP};
pub use linalg::{cholesky, dot, symmetric_eigen, Matrix, SpdMatrix};
pub use scalar::{log_sum_exp, Real};
pub use special::{digamma, ln_gamma};
pub use univariate::{Normal, StudentT, UnivariateCdf};
