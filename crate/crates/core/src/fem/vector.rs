use crate::error::{Error, Result};

fn interior_len(level: u32) -> usize {
    let n = (1usize << level) - 1;
    n * n
}

macro_rules! level_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            level: u32,
            coeffs: Vec<f64>,
        }

        impl $name {
            /// Wraps interior coefficients, checking length and finiteness.
            pub fn new(level: u32, coeffs: Vec<f64>) -> Result<Self> {
                if level < 1 {
                    return Err(Error::DegenerateMesh { level });
                }
                let expected = interior_len(level);
                if coeffs.len() != expected {
                    return Err(Error::DimensionMismatch { expected, found: coeffs.len() });
                }
                if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite coefficient at index {i}"
                    )));
                }
                Ok(Self { level, coeffs })
            }

            pub(crate) fn from_raw(level: u32, coeffs: Vec<f64>) -> Self {
                debug_assert_eq!(coeffs.len(), interior_len(level));
                Self { level, coeffs }
            }

            pub fn zeros(level: u32) -> Self {
                Self { level, coeffs: vec![0.0; interior_len(level)] }
            }

            pub fn level(&self) -> u32 {
                self.level
            }

            pub fn len(&self) -> usize {
                self.coeffs.len()
            }

            pub fn is_empty(&self) -> bool {
                self.coeffs.is_empty()
            }

            pub fn coeffs(&self) -> &[f64] {
                &self.coeffs
            }

            pub fn coeffs_mut(&mut self) -> &mut [f64] {
                &mut self.coeffs
            }

            pub fn into_coeffs(self) -> Vec<f64> {
                self.coeffs
            }

            pub fn check_level(&self, level: u32) -> Result<()> {
                if self.level != level {
                    return Err(Error::LevelMismatch { expected: level, found: self.level });
                }
                Ok(())
            }

            /// `self += alpha * other`.
            pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
                other.check_level(self.level)?;
                for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
                    *a += alpha * b;
                }
                Ok(())
            }

            pub fn scale(&mut self, alpha: f64) {
                self.coeffs.iter_mut().for_each(|c| *c *= alpha);
            }

            pub fn scaled(&self, alpha: f64) -> Self {
                let mut out = self.clone();
                out.scale(alpha);
                out
            }

            /// Euclidean norm of the coefficient array.
            pub fn l2_coeff_norm(&self) -> f64 {
                dot(&self.coeffs, &self.coeffs).sqrt()
            }

            pub fn is_zero(&self) -> bool {
                self.coeffs.iter().all(|&c| c == 0.0)
            }
        }
    };
}

level_vector!(
    /// Nodal values of a continuous piecewise-linear function vanishing on the
    /// boundary.
    FemVector
);

level_vector!(
    /// A linear functional tested against the nodal hat functions of a level.
    DualVector
);

impl DualVector {
    /// Duality pairing `self(v) = sum_i self_i v_i`.
    pub fn apply(&self, v: &FemVector) -> Result<f64> {
        v.check_level(self.level)?;
        Ok(dot(&self.coeffs, v.coeffs()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators; fixed association order keeps results reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
