use thiserror::Error;

/// Errors raised by the numerical kernels and the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mesh level {level} has no interior nodes")]
    DegenerateMesh { level: u32 },
    #[error("mesh level {level} does not resolve the 4x4 subdomain grid (need level >= 2)")]
    SubdomainMisaligned { level: u32 },
    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: u32, found: u32 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("operator is singular or indefinite (pivot {pivot:e} at row {row})")]
    SingularOperator { row: usize, pivot: f64 },
    #[error("diffusion operator lost ellipticity at the requested parameter")]
    LostEllipticity,
    #[error("parameter coordinate {coord} = {value} lies outside the parameter box")]
    OutOfBox { coord: usize, value: f64 },
    #[error("measurement representer {index} is linearly dependent on the previous ones")]
    DependentRepresenters { index: usize },
    #[error("reduced space has an empty basis")]
    EmptyBasis,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("reduced space is unstable against the measurement space (inf-sup constant is infinite)")]
    UnstableEstimate,
    #[error("no cell of the family can be split further")]
    UnsplittableCell,
    #[error("every cell of the family produced an unstable estimate")]
    AllCellsUnstable,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
