use serde::{Deserialize, Serialize};

use super::Family;
use crate::data::Standardization;
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, mvn_logpdf, mvt_logpdf, Matrix, SpdMatrix};

/// Scale structure of one mixture component, in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentScale {
    Full { matrix: Matrix<f64> },
    /// `Λ Λ' + ψ^{-1} I`
    Factor {
        loadings: Matrix<f64>,
        noise_precision: f64,
    },
}

impl ComponentScale {
    pub fn effective(&self) -> Matrix<f64> {
        match self {
            ComponentScale::Full { matrix } => matrix.clone(),
            ComponentScale::Factor {
                loadings,
                noise_precision,
            } => {
                let mut m = loadings.matmul(&loadings.transpose());
                m.add_diag(noise_precision.recip());
                m
            }
        }
    }

    pub fn factor_count(&self) -> Option<usize> {
        match self {
            ComponentScale::Full { .. } => None,
            ComponentScale::Factor { loadings, .. } => Some(loadings.cols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub location: Vec<f64>,
    pub scale: ComponentScale,
    /// Degrees of freedom; `None` for normal components.
    pub dof: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MixtureRecord {
    family: Family,
    weights: Vec<f64>,
    components: Vec<Component>,
    standardization: Standardization,
}

/// A fitted K-component mixture. Parameters live in standardized units;
/// [`MixtureModel::logpdf`] evaluates in the original units by applying
/// the stored standardization and its Jacobian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureRecord", into = "MixtureRecord")]
pub struct MixtureModel {
    family: Family,
    weights: Vec<f64>,
    components: Vec<Component>,
    standardization: Standardization,
    scales: Vec<SpdMatrix<f64>>,
}

impl TryFrom<MixtureRecord> for MixtureModel {
    type Error = Error;

    fn try_from(r: MixtureRecord) -> Result<Self> {
        MixtureModel::new(r.family, r.weights, r.components, r.standardization)
    }
}

impl From<MixtureModel> for MixtureRecord {
    fn from(m: MixtureModel) -> Self {
        MixtureRecord {
            family: m.family,
            weights: m.weights,
            components: m.components,
            standardization: m.standardization,
        }
    }
}

impl MixtureModel {
    pub fn new(
        family: Family,
        weights: Vec<f64>,
        components: Vec<Component>,
        standardization: Standardization,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Data(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("mixture weights must be a probability vector (sum {total})")));
        }
        let d = standardization.dim();
        let mut scales = Vec::with_capacity(components.len());
        for (k, c) in components.iter().enumerate() {
            if c.location.len() != d {
                return Err(Error::Data(format!("component {k} location has wrong dimension")));
            }
            if family.is_t() != c.dof.is_some() {
                return Err(Error::Data(format!("component {k} dof does not match family {family}")));
            }
            if let Some(0) = c.dof {
                return Err(Error::Data(format!("component {k} has zero degrees of freedom")));
            }
            match (&c.scale, family.is_factor()) {
                (ComponentScale::Full { .. }, false) | (ComponentScale::Factor { .. }, true) => {}
                _ => return Err(Error::Data(format!("component {k} scale does not match family {family}"))),
            }
            if let ComponentScale::Factor { noise_precision, .. } = c.scale {
                if !(noise_precision > 0.0) {
                    return Err(Error::Data(format!("component {k} noise precision must be positive")));
                }
            }
            let eff = c.scale.effective();
            if eff.rows() != d {
                return Err(Error::Data(format!("component {k} scale has wrong dimension")));
            }
            scales.push(SpdMatrix::with_jitter(eff)?);
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(MixtureModel {
            family,
            weights,
            components,
            standardization,
            scales,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.standardization.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Effective scale matrix of component `k` in standardized units.
    pub fn scale(&self, k: usize) -> &SpdMatrix<f64> {
        &self.scales[k]
    }

    pub fn factor_counts(&self) -> Vec<usize> {
        self.components
            .iter()
            .filter_map(|c| c.scale.factor_count())
            .collect()
    }

    pub fn dofs(&self) -> Vec<u32> {
        self.components.iter().filter_map(|c| c.dof).collect()
    }

    /// Log-density of component `k` at a standardized point.
    pub fn component_logpdf_std(&self, k: usize, z: &[f64]) -> f64 {
        let c = &self.components[k];
        match c.dof {
            Some(nu) => mvt_logpdf(z, &c.location, &self.scales[k], nu as f64),
            None => mvn_logpdf(z, &c.location, &self.scales[k]),
        }
    }

    /// Mixture log-density at a standardized point.
    pub fn logpdf_std(&self, z: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| self.weights[k].ln() + self.component_logpdf_std(k, z))
            .collect();
        log_sum_exp(&terms)
    }

    /// Mixture log-density at a point in original units.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        let z = self.standardization.apply(x);
        self.logpdf_std(&z) + self.standardization.log_jacobian()
    }

    /// Location of component `k` in original units.
    pub fn location(&self, k: usize) -> Vec<f64> {
        self.standardization.invert(&self.components[k].location)
    }

    /// Scale matrix of component `k` in original units.
    pub fn scale_original(&self, k: usize) -> Matrix<f64> {
        let s = &self.standardization.scale;
        let m = self.scales[k].matrix();
        Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * s[i] * s[j])
    }

    /// Correlation matrix implied by the scale of component `k`.
    pub fn correlation(&self, k: usize) -> Matrix<f64> {
        let m = self.scales[k].matrix();
        Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt()
        })
    }

    /// Parameters of the coordinate-`j` marginal in original units, one
    /// `(weight, location, scale, dof)` tuple per component.
    pub fn marginal_components(&self, j: usize) -> Vec<(f64, f64, f64, Option<u32>)> {
        let (m, s) = (self.standardization.shift[j], self.standardization.scale[j]);
        (0..self.n_components())
            .map(|k| {
                let c = &self.components[k];
                let v = self.scales[k].matrix()[(j, j)];
                (self.weights[k], m + s * c.location[j], s * v.sqrt(), c.dof)
            })
            .collect()
    }
}

/// Log-density of a fitted mixture at `x` (original units).
pub fn mixture_logpdf(model: &MixtureModel, x: &[f64]) -> f64 {
    model.logpdf(x)
}
