//! Copula-type multivariate density estimation with variational Bayes
//! mixtures.
//!
//! The numerical kernels in [`numerics`] are generic over [`numerics::Real`]
//! (`f64` and `f32`); the fitting and evaluation layers work in `f64`.

pub mod copula;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod marginals;
pub mod numerics;
pub mod seed;
pub mod vb;

pub use error::{Error, Result};

pub type Matrix64 = numerics::Matrix<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type SpdMatrix64 = numerics::SpdMatrix<f64>;
pub type SpdMatrix32 = numerics::SpdMatrix<f32>;
pub type Normal64 = numerics::Normal<f64>;
pub type StudentT64 = numerics::StudentT<f64>;
