//! Observation matrices and column standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// `n` observations of `d` real variables, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix<f64>,
    names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Matrix<f64>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Data("data matrix must have at least one row and column".into()));
        }
        for i in 0..values.rows() {
            for (j, v) in values.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value {v} at row {}, column {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(DataMatrix { values, names: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(Error::Data("ragged rows".into()));
        }
        Self::new(Matrix::from_rows(rows))
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.ncols() {
            return Err(Error::Data(format!(
                "{} column names for {} columns",
                names.len(),
                self.ncols()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.nrows()).map(move |i| self.row(i))
    }

    /// Rows at the given indices, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix {
        let d = self.ncols();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DataMatrix {
            values: Matrix::from_vec(idx.len(), d, data),
            names: self.names.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        let values = Matrix::from_fn(self.nrows(), cols.len(), |i, j| self.values[(i, cols[j])]);
        let names = self
            .names
            .as_ref()
            .map(|n| cols.iter().map(|&c| n[c].clone()).collect());
        DataMatrix { values, names }
    }
}

/// Per-column affine map `z = (x - shift) / scale` applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// Divisor convention used for `scale`; always `"sample"` (n - 1).
    pub convention: String,
}

impl Standardization {
    pub fn identity(d: usize) -> Self {
        Standardization {
            shift: vec![0.0; d],
            scale: vec![1.0; d],
            convention: "sample".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| m + v * s)
            .collect()
    }

    /// `ln |dz/dx| = -Σ ln scale_j`, added to standardized-space log-densities.
    pub fn log_jacobian(&self) -> f64 {
        -self.scale.iter().map(|s| s.ln()).sum::<f64>()
    }

    pub fn apply_matrix(&self, data: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(data.rows(), data.cols(), |i, j| {
            (data[(i, j)] - self.shift[j]) / self.scale[j]
        })
    }
}

pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Column-wise `(x - mean) / sd` with the sample (n - 1) standard deviation.
pub fn standardize(data: &DataMatrix) -> Result<(DataMatrix, Standardization)> {
    let d = data.ncols();
    let mut shift = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for j in 0..d {
        let (m, s) = mean_and_sd(&data.column(j));
        if !(s > 0.0) || !s.is_finite() {
            let name = data
                .names()
                .map(|n| n[j].clone())
                .unwrap_or_else(|| format!("#{}", j + 1));
            return Err(Error::Data(format!("column {name} has zero variance")));
        }
        shift.push(m);
        scale.push(s);
    }
    let record = Standardization {
        shift,
        scale,
        convention: "sample".into(),
    };
    let values = record.apply_matrix(data.matrix());
    Ok((
        DataMatrix {
            values,
            names: data.names.clone(),
        },
        record,
    ))
}
