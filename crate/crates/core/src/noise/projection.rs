//! Gate-referred projection of a spatial noise potential.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::device::GateVector;
use crate::error::{Error, Result};

/// Sampled gate responses g_j(r) and a noise potential δφ(r) on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    /// Cell centers; informational only.
    #[serde(default)]
    pub positions: Vec<[f64; 3]>,
    pub volumes: Vec<f64>,
    /// `responses[j][cell]` = g_j at that cell.
    pub responses: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
}

impl FieldGrid {
    pub fn validate(&self) -> Result<()> {
        let n = self.volumes.len();
        if n == 0 {
            return Err(Error::invalid("field grid has no cells"));
        }
        if self.responses.is_empty() {
            return Err(Error::invalid("field grid has no gate responses"));
        }
        if n < self.responses.len() {
            return Err(Error::invalid("field grid needs at least as many cells as gates"));
        }
        for r in self.responses.iter().chain(std::iter::once(&self.noise)) {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        if !self.positions.is_empty() && self.positions.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.positions.len() });
        }
        if self.volumes.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("cell volumes must be nonnegative"));
        }
        Ok(())
    }

    /// Σ_j v_j·g_j(r).
    pub fn field_of(&self, v: &[f64]) -> Vec<f64> {
        (0..self.volumes.len()).map(|c| self.responses.iter().zip(v).map(|(g, x)| g[c] * x).sum()).collect()
    }
}

/// v = M⁺b with M_jk = Σ g_j g_k vol and b_j = Σ δφ g_j vol.
///
/// Solved as the volume-weighted least-squares problem min ‖W^½(Gv − δφ)‖
/// through an SVD, which equals M⁺b (minimum norm when M is singular) without
/// squaring the condition number.
pub fn project_noise_to_gates(f: &FieldGrid) -> Result<GateVector> {
    f.validate()?;
    let (cells, gates) = (f.volumes.len(), f.responses.len());
    let w: Vec<f64> = f.volumes.iter().map(|v| v.sqrt()).collect();
    let a = DMatrix::from_fn(cells, gates, |c, j| w[c] * f.responses[j][c]);
    let b = DVector::from_iterator(cells, f.noise.iter().zip(&w).map(|(p, w)| p * w));
    let svd = a.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12 * cells.max(gates) as f64;
    if svd.singular_values.max() == 0.0 {
        return Ok(vec![0.0; gates]);
    }
    let x = svd.solve(&b, eps).map_err(|e| Error::degenerate("project_noise_to_gates", e))?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(cells: usize, gates: usize, seed: u64) -> FieldGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldGrid {
            positions: Vec::new(),
            volumes: (0..cells).map(|_| rng.random_range(0.5..1.5)).collect(),
            responses: (0..gates).map(|_| (0..cells).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            noise: vec![0.0; cells],
        }
    }

    #[test]
    fn exact_representation() {
        let mut f = grid(200, 4, 1);
        f.noise = f.field_of(&[2.0, 0.0, 0.0, 0.0]);
        let v = project_noise_to_gates(&f).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12 && v[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        let mut f = grid(50, 2, 2);
        f.responses[1] = f.responses[0].clone();
        f.noise = f.responses[0].clone();
        let v = project_noise_to_gates(&f).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-10 && (v[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn idempotent() {
        let mut f = grid(300, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        f.noise = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = project_noise_to_gates(&f).unwrap();
        f.noise = f.field_of(&v);
        let w = project_noise_to_gates(&f).unwrap();
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let f =
            FieldGrid { positions: Vec::new(), volumes: Vec::new(), responses: vec![Vec::new()], noise: Vec::new() };
        assert!(project_noise_to_gates(&f).is_err());
        let mut f = grid(10, 2, 4);
        f.noise.pop();
        assert!(project_noise_to_gates(&f).is_err());
    }
}
