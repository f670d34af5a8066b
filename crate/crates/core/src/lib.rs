//! Nonlinear state estimation for affine-parametric elliptic problems.
//!
//! A state `u` of a parametric diffusion problem is reconstructed from `m`
//! local-average measurements. The parameter box is partitioned into cells,
//! each carrying an affine reduced space; every cell proposes a PBDW
//! reconstruction, and the candidate with the smallest residual-based
//! surrogate distance to the solution manifold is selected. The surrogate
//! can be evaluated on a coarser nested mesh than the one the reduced spaces
//! live on, which is where most of the online cost goes.
//!
//! Module map:
//!
//! * [`fem`]: nested P1 meshes on the unit square, assembly, SPD solves,
//!   Riesz lifts and inter-level transfer.
//! * [`problem`]: the 16-subdomain diffusion problem in affine form.
//! * [`measurement`]: local-average functionals, their representers and the
//!   inf-sup constant.
//! * [`reduced_basis`]: greedy affine reduced spaces and the PBDW estimator.
//! * [`partition`]: greedy splitting of the parameter box into cells.
//! * [`surrogate`]: the residual surrogate distance and its box-constrained
//!   minimisation.
//! * [`pipeline`]: candidate construction and surrogate model selection.

pub mod error;
pub mod fem;
pub mod measurement;
mod ortho;
pub mod partition;
pub mod pipeline;
pub mod problem;
pub mod reduced_basis;
pub mod surrogate;

pub use error::{Error, Result};
pub use measurement::{MeasurementBox, MeasurementSpace};
pub use reduced_basis::{AffineReducedSpace, GreedyConfig};
pub use partition::{AdmissibleFamily, FamilyContext, ParameterCell, SplitRecord, SplitStop, TrainingSet};
pub use fem::{
    DualVector, FemVector, LevelHierarchy, LevelSpace, SolverKind, SparseOperator, SpdSolver,
    StructuredMesh,
};
pub use pipeline::{Candidate, CandidateSet, SelectionResult};
pub use problem::{AffineParametricProblem, CoefficientRule, ParameterBox, ParameterPoint};
pub use surrogate::{SurrogateEvaluator, SurrogateQuadratic, SurrogateValue};

/// Default relative tolerance for iterative solves.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;
