//! Modified Gram-Schmidt in the H^1_0 inner product.

use crate::error::Result;
use crate::fem::{DualVector, FemVector, LevelSpace};

/// An H^1_0-orthonormal family together with the Gram images `G q_i`, so that
/// `<q_i, v>` is a plain dot product.
#[derive(Debug, Clone, Default)]
pub(crate) struct OrthonormalFamily {
    pub vectors: Vec<FemVector>,
    pub duals: Vec<DualVector>,
}

impl OrthonormalFamily {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    /// Coordinates `<q_i, v>`.
    pub fn coordinates(&self, v: &FemVector) -> Result<Vec<f64>> {
        self.duals.iter().map(|d| d.apply(v)).collect()
    }

    /// Orthogonalizes `v` against the family with one reorthogonalization
    /// pass and appends it, unless its remaining norm is at most
    /// `drop_tol * ||v||`. Returns whether it was appended.
    pub fn try_push(&mut self, space: &LevelSpace, mut v: FemVector, drop_tol: f64) -> Result<bool> {
        let original = space.norm(&v)?;
        if original == 0.0 {
            return Ok(false);
        }
        for _ in 0..2 {
            for (q, gq) in self.vectors.iter().zip(&self.duals) {
                let c = gq.apply(&v)?;
                v.axpy(-c, q)?;
            }
        }
        let norm = space.norm(&v)?;
        if !(norm > drop_tol * original) {
            return Ok(false);
        }
        v.scale(norm.recip());
        let gv = space.to_dual(&v)?;
        self.vectors.push(v);
        self.duals.push(gv);
        Ok(true)
    }
}
