//! Shared fixtures for the benchmarks.

use surrosel::fem::SolverKind;
use surrosel::{AffineParametricProblem, CoefficientRule, FemVector, LevelHierarchy, ParameterPoint};

/// Problem, level hierarchy and a perturbed solution on `level`.
pub fn fixture(level: u32) -> (AffineParametricProblem, LevelHierarchy, FemVector) {
    let problem = AffineParametricProblem::diffusion(level, CoefficientRule::Decay090).expect("problem");
    let levels = LevelHierarchy::new(level, SolverKind::Auto, 1e-10).expect("levels");
    let y = ParameterPoint::new((0..16).map(|j| if j % 2 == 0 { 0.5 } else { -0.3 }).collect());
    let mut v = problem.solve_forward(&y, 1e-10).expect("solve");
    let wiggle = FemVector::new(level, (0..v.len()).map(|k| 1e-3 * ((k * 37 % 101) as f64 / 101.0 - 0.5)).collect())
        .expect("vector");
    v.axpy(1.0, &wiggle).expect("same level");
    (problem, levels, v)
}
