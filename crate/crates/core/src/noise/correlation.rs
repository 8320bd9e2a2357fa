//! Gate-to-gate noise correlation C_jk.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateCorrelation {
    /// C = 1.
    #[default]
    Identity,
    /// C_jk = A_j²·δ_jk.
    Diagonal { weights: Vec<f64> },
    /// Full symmetric positive semi-definite matrix.
    Full { matrix: Vec<Vec<f64>> },
}

impl GateCorrelation {
    /// A_j = `a_plunger` on gates whose name starts with `P`, 1 elsewhere.
    pub fn plunger_weighted(d: &DeviceModel, a_plunger: f64) -> Self {
        GateCorrelation::Diagonal {
            weights: d.gates().iter().map(|g| if g.starts_with('P') { a_plunger } else { 1.0 }).collect(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            GateCorrelation::Identity => Ok(()),
            GateCorrelation::Diagonal { weights } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::invalid("correlation weights must be finite"));
                }
                Ok(())
            }
            GateCorrelation::Full { matrix } => {
                let m = self.to_matrix(n)?;
                let asym = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).any(|(i, j)| {
                    (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (m[(i, j)].abs() + m[(j, i)].abs()).max(1e-300)
                });
                if asym || matrix.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("correlation matrix must be finite and symmetric"));
                }
                let eig = SymmetricEigen::new(m);
                let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale.max(1e-300)) {
                    return Err(Error::invalid("correlation matrix must be positive semi-definite"));
                }
                Ok(())
            }
        }
    }

    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            GateCorrelation::Identity => Ok(DMatrix::identity(n, n)),
            GateCorrelation::Diagonal { weights } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
                }
                Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, weights.iter().map(|w| w * w))))
            }
            GateCorrelation::Full { matrix } => {
                if matrix.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: matrix.len() });
                }
                if let Some(r) = matrix.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch { expected: n, got: r.len() });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
        }
    }

    /// gᵀ C g.
    pub fn quad_form(&self, g: &[f64]) -> Result<f64> {
        let n = g.len();
        match self {
            GateCorrelation::Identity => Ok(g.iter().map(|x| x * x).sum()),
            GateCorrelation::Diagonal { weights } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
                }
                Ok(g.iter().zip(weights).map(|(x, w)| (x * w).powi(2)).sum())
            }
            GateCorrelation::Full { .. } => {
                let m = self.to_matrix(n)?;
                let v = nalgebra::DVector::from_column_slice(g);
                Ok((v.transpose() * &m * &v)[(0, 0)])
            }
        }
    }

    /// L with L·Lᵀ = C, for drawing correlated offsets.
    pub fn sqrt_factor(&self, n: usize) -> Result<DMatrix<f64>> {
        self.validate(n)?;
        match self {
            GateCorrelation::Identity => Ok(DMatrix::identity(n, n)),
            GateCorrelation::Diagonal { weights } => {
                Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, weights.iter().map(|w| w.abs()))))
            }
            GateCorrelation::Full { .. } => {
                let eig = SymmetricEigen::new(self.to_matrix(n)?);
                let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root))
            }
        }
    }
}
