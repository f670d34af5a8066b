//! Nested P1 finite elements on the unit square.

mod level;
mod mesh;
mod solver;
mod sparse;
mod transfer;
mod vector;

pub use level::{h1_inner, riesz_lift, LevelHierarchy, LevelSpace};
pub use mesh::{build_mesh, GridVertex, StructuredMesh, MAX_LEVEL};
pub use solver::{solve_spd, SolverKind, SpdSolver, BAND_MEMORY_LIMIT};
pub use sparse::{
    assemble_constant_load, assemble_diffusion_stiffness, assemble_h1_gram, subdomain_of, SparseOperator,
    SparsityPattern, SUBDOMAINS_PER_SIDE,
};
pub(crate) use sparse::{assemble_diffusion_on, new_pattern};
pub use transfer::{prolong, restrict_dual, restrict_dual_to};
pub use vector::{DualVector, FemVector};
