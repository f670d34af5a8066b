use super::mesh::StructuredMesh;
use super::solver::{SolverKind, SpdSolver};
use super::sparse::{assemble_h1_gram, SparseOperator};
use super::vector::{DualVector, FemVector};
use crate::error::{Error, Result};

/// A mesh level with its H^1_0 Gram matrix and a factorized Riesz solver.
#[derive(Debug, Clone)]
pub struct LevelSpace {
    mesh: StructuredMesh,
    gram: SparseOperator,
    solver: SpdSolver,
}

impl LevelSpace {
    pub fn new(level: u32, kind: SolverKind, tol: f64) -> Result<Self> {
        let mesh = StructuredMesh::new(level)?;
        let gram = assemble_h1_gram(&mesh);
        let solver = SpdSolver::new(&gram, kind, tol)?;
        Ok(Self { mesh, gram, solver })
    }

    pub fn level(&self) -> u32 {
        self.mesh.level()
    }

    pub fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    pub fn gram(&self) -> &SparseOperator {
        &self.gram
    }

    /// Riesz representer `e` of `dual`: `<e, z> = dual(z)` for all `z` on this level.
    pub fn riesz_lift(&self, dual: &DualVector) -> Result<FemVector> {
        self.solver.solve(dual)
    }

    pub fn inner(&self, u: &FemVector, v: &FemVector) -> Result<f64> {
        h1_inner(u, v, &self.gram)
    }

    pub fn norm(&self, u: &FemVector) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }

    /// `G u`, the functional `z -> <u, z>`.
    pub fn to_dual(&self, u: &FemVector) -> Result<DualVector> {
        self.gram.apply(u)
    }
}

/// Levels `1..=fine`, each with its own factorized Gram matrix.
#[derive(Debug, Clone)]
pub struct LevelHierarchy {
    levels: Vec<LevelSpace>,
}

impl LevelHierarchy {
    pub fn new(fine: u32, kind: SolverKind, tol: f64) -> Result<Self> {
        if fine < 1 {
            return Err(Error::DegenerateMesh { level: fine });
        }
        let levels = (1..=fine).map(|s| LevelSpace::new(s, kind, tol)).collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    pub fn fine_level(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn fine(&self) -> &LevelSpace {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn level(&self, s: u32) -> Result<&LevelSpace> {
        if s < 1 || s > self.fine_level() {
            return Err(Error::LevelMismatch { expected: self.fine_level(), found: s });
        }
        Ok(&self.levels[(s - 1) as usize])
    }
}

/// `<u, v>_{H^1_0} = u^T G v`.
pub fn h1_inner(u: &FemVector, v: &FemVector, gram: &SparseOperator) -> Result<f64> {
    u.check_level(gram.level())?;
    v.check_level(gram.level())?;
    gram.form(u, v)
}

/// Riesz lift on a mesh, factorizing its Gram matrix on the fly.
pub fn riesz_lift(mesh: &StructuredMesh, dual: &DualVector, tol: f64) -> Result<FemVector> {
    dual.check_level(mesh.level())?;
    let gram = assemble_h1_gram(mesh);
    SpdSolver::new(&gram, SolverKind::Auto, tol)?.solve(dual)
}
