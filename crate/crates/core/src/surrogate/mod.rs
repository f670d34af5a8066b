//! Residual surrogate distance `S_s(v, M) = min_y ||A(y) v - f(y)||` with the
//! dual norm taken on mesh level `s`.
//!
//! The fine-level residual pieces `r_j = A_j v - f_j` are restricted to level
//! `s` and Riesz-lifted there; their Gram matrix turns the minimisation over
//! the parameter box into a small quadratic program.

mod qp;

pub use qp::{minimize_box, BoxQuadratic, QpSolution, MAX_ITERATIONS, PG_TOL};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{restrict_dual_to, DualVector, FemVector, LevelHierarchy, LevelSpace};
use crate::problem::{AffineParametricProblem, ParameterBox, ParameterPoint};

/// `r_j = A_j v - f_j` for `j = 0..d`, restricted to level `s`.
pub fn residual_duals(problem: &AffineParametricProblem, v: &FemVector, s: u32) -> Result<Vec<DualVector>> {
    v.check_level(problem.level())?;
    if s > problem.level() || s == 0 {
        return Err(Error::LevelMismatch { expected: problem.level(), found: s });
    }
    problem
        .operators()
        .par_iter()
        .zip(problem.loads().par_iter())
        .map(|(a, f)| {
            let mut r = a.apply(v)?;
            r.axpy(-1.0, f)?;
            restrict_dual_to(&r, s)
        })
        .collect()
}

/// Riesz lifts `e_0..e_d` on one level and their Gram matrix.
#[derive(Debug, Clone)]
pub struct SurrogateQuadratic {
    level: u32,
    gram: DMatrix<f64>,
    lifts: Vec<FemVector>,
    bounds: ParameterBox,
}

impl SurrogateQuadratic {
    /// Lifts the given duals on `space` and forms their Gram matrix.
    pub fn from_duals(space: &LevelSpace, duals: &[DualVector], bounds: ParameterBox) -> Result<Self> {
        if duals.len() != bounds.dim() + 1 {
            return Err(Error::DimensionMismatch { expected: bounds.dim() + 1, found: duals.len() });
        }
        let lifts: Vec<FemVector> = duals.par_iter().map(|r| space.riesz_lift(r)).collect::<Result<_>>()?;
        let images: Vec<DualVector> = lifts.par_iter().map(|e| space.to_dual(e)).collect::<Result<_>>()?;
        let n = lifts.len();
        let mut gram = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let g = images[j].apply(&lifts[i])?;
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        Ok(Self { level: space.level(), gram, lifts, bounds })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.lifts.len() - 1
    }

    /// Full `(d+1) x (d+1)` Gram matrix of `e_0..e_d`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn lifts(&self) -> &[FemVector] {
        &self.lifts
    }

    pub fn bounds(&self) -> &ParameterBox {
        &self.bounds
    }

    pub fn q(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.gram.view((1, 1), (d, d)).into_owned()
    }

    pub fn b(&self) -> DVector<f64> {
        let d = self.dim();
        self.gram.view((1, 0), (d, 1)).column(0).into_owned()
    }

    pub fn c(&self) -> f64 {
        self.gram[(0, 0)]
    }

    /// `c + 2 b^T y + y^T Q y`.
    pub fn value(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        let mut z = Vec::with_capacity(d + 1);
        z.push(1.0);
        z.extend_from_slice(y);
        let z = DVector::from_vec(z);
        z.dot(&(&self.gram * &z))
    }

    /// `e(y) = e_0 + sum_j y_j e_j`.
    pub fn error_function(&self, y: &[f64]) -> Result<FemVector> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: y.len() });
        }
        let mut e = self.lifts[0].clone();
        for (&w, ej) in y.iter().zip(&self.lifts[1..]) {
            if w != 0.0 {
                e.axpy(w, ej)?;
            }
        }
        Ok(e)
    }

    /// `R_s(v, y) = ||e(y)||` evaluated from the lifts rather than the Gram matrix.
    pub fn residual_norm(&self, space: &LevelSpace, y: &[f64]) -> Result<f64> {
        space.norm(&self.error_function(y)?)
    }

    pub fn to_box_qp(&self) -> BoxQuadratic {
        BoxQuadratic {
            q: self.q(),
            b: self.b(),
            c: self.c(),
            lower: DVector::from_column_slice(self.bounds.lower()),
            upper: DVector::from_column_slice(self.bounds.upper()),
        }
    }
}

/// Outcome of one surrogate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateValue {
    pub level: u32,
    /// `S_s(v, M)`.
    pub distance: f64,
    /// Minimiser over the box; a diagnostic, not a parameter estimate.
    pub y_star: ParameterPoint,
    pub converged: bool,
}

/// Evaluates surrogates of fine-level functions on any level of a hierarchy.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateEvaluator<'a> {
    problem: &'a AffineParametricProblem,
    levels: &'a LevelHierarchy,
}

impl<'a> SurrogateEvaluator<'a> {
    pub fn new(problem: &'a AffineParametricProblem, levels: &'a LevelHierarchy) -> Result<Self> {
        if levels.fine_level() != problem.level() {
            return Err(Error::LevelMismatch { expected: problem.level(), found: levels.fine_level() });
        }
        Ok(Self { problem, levels })
    }

    pub fn problem(&self) -> &'a AffineParametricProblem {
        self.problem
    }

    pub fn levels(&self) -> &'a LevelHierarchy {
        self.levels
    }

    pub fn residual_duals(&self, v: &FemVector, s: u32) -> Result<Vec<DualVector>> {
        residual_duals(self.problem, v, s)
    }

    pub fn build_quadratic(&self, v: &FemVector, s: u32) -> Result<SurrogateQuadratic> {
        let duals = self.residual_duals(v, s)?;
        SurrogateQuadratic::from_duals(self.levels.level(s)?, &duals, self.problem.bounds().clone())
    }

    /// `R_s(v, y)`.
    pub fn residual_norm(&self, v: &FemVector, y: &ParameterPoint, s: u32) -> Result<f64> {
        self.problem.bounds().check(y)?;
        let quad = self.build_quadratic(v, s)?;
        quad.residual_norm(self.levels.level(s)?, y.coords())
    }

    pub fn surrogate(&self, v: &FemVector, s: u32) -> Result<SurrogateValue> {
        let quad = self.build_quadratic(v, s)?;
        self.minimize(&quad)
    }

    /// Residual pieces on the fine level; they are shared by every level `s`.
    pub fn fine_residuals(&self, v: &FemVector) -> Result<Vec<DualVector>> {
        residual_duals(self.problem, v, self.problem.level())
    }

    /// `S_s` from precomputed fine-level residual pieces.
    pub fn surrogate_from_residuals(&self, fine: &[DualVector], s: u32) -> Result<SurrogateValue> {
        let duals: Vec<DualVector> = fine.par_iter().map(|r| restrict_dual_to(r, s)).collect::<Result<_>>()?;
        let quad = SurrogateQuadratic::from_duals(self.levels.level(s)?, &duals, self.problem.bounds().clone())?;
        self.minimize(&quad)
    }

    /// Minimises an already built quadratic.
    pub fn minimize(&self, quad: &SurrogateQuadratic) -> Result<SurrogateValue> {
        let sol = minimize_box(&quad.to_box_qp());
        let y = sol.y.as_slice().to_vec();
        // the Gram form loses digits when S is tiny relative to ||e_0||
        let distance = quad.residual_norm(self.levels.level(quad.level())?, &y)?;
        if !distance.is_finite() {
            return Err(Error::NonConvergence { iterations: sol.iterations, residual: distance });
        }
        Ok(SurrogateValue { level: quad.level(), distance, y_star: ParameterPoint::new(y), converged: sol.converged })
    }
}
