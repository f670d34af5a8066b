//! The affine-parametric diffusion problem on the unit square.
//!
//! `-div(a(x, y) grad u) = 1` with homogeneous Dirichlet data and
//! `a(x, y) = 1 + sum_j c_j y_j chi_{D_j}(x)`, where `D_1..D_16` are the
//! quarter-width squares ordered lexicographically (x fastest, bottom row
//! first). In operator form `A(y) = A_0 + sum_j y_j A_j`, `f(y) = f_0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_constant_load, assemble_diffusion_on, new_pattern, DualVector, FemVector, SolverKind,
    SparseOperator, SpdSolver, StructuredMesh,
};

/// Number of parameters of the diffusion problem.
pub const PARAMETER_DIM: usize = 16;

/// Name of the generator behind [`sample_parameters`], recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/rand_chacha-0.3 (seed_from_u64, set_stream)";

/// Decay rule for the subdomain amplitudes, `c_j = c / j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientRule {
    /// `c_j = 0.9 / j`
    Decay090,
    /// `c_j = 0.99 / j`
    Decay099,
}

impl CoefficientRule {
    pub fn leading(&self) -> f64 {
        match self {
            Self::Decay090 => 0.9,
            Self::Decay099 => 0.99,
        }
    }

    pub fn from_leading(c: f64) -> Result<Self> {
        if c == 0.9 {
            Ok(Self::Decay090)
        } else if c == 0.99 {
            Ok(Self::Decay099)
        } else {
            Err(Error::InvalidArgument(format!("unsupported coefficient rule {c} (use 0.9 or 0.99)")))
        }
    }

    /// `c_1..c_d`.
    pub fn coefficients(&self, d: usize) -> Vec<f64> {
        (1..=d).map(|j| self.leading() / j as f64).collect()
    }
}

/// A point of the parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn unit(d: usize, j: usize) -> Self {
        let mut y = vec![0.0; d];
        y[j] = 1.0;
        Self(y)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Axis-aligned bounds of a parameter region.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidArgument("box bounds must satisfy lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[-1, 1]^d`.
    pub fn symmetric_unit(d: usize) -> Self {
        Self { lower: vec![-1.0; d], upper: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Closed-box membership check.
    pub fn check(&self, y: &ParameterPoint) -> Result<()> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: y.dim() });
        }
        for (coord, ((&v, &l), &u)) in y.coords().iter().zip(&self.lower).zip(&self.upper).enumerate() {
            if !(v >= l && v <= u) {
                return Err(Error::OutOfBox { coord, value: v });
            }
        }
        Ok(())
    }

    /// Splits coordinate `i` at its midpoint into `(lower half, upper half)`.
    pub fn halve(&self, i: usize) -> (Self, Self) {
        let mid = 0.5 * (self.lower[i] + self.upper[i]);
        let mut lo = self.clone();
        let mut hi = self.clone();
        lo.upper[i] = mid;
        hi.lower[i] = mid;
        (lo, hi)
    }

    pub fn project(&self, y: &mut [f64]) {
        for ((v, &l), &u) in y.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }
}

/// Assembled affine expansion `A_0..A_d`, `f_0..f_d` on one mesh level.
#[derive(Debug, Clone)]
pub struct AffineParametricProblem {
    mesh: StructuredMesh,
    rule: CoefficientRule,
    coeffs: Vec<f64>,
    operators: Vec<SparseOperator>,
    loads: Vec<DualVector>,
    bounds: ParameterBox,
}

impl AffineParametricProblem {
    /// The 16-subdomain diffusion problem on level `level >= 2`.
    pub fn diffusion(level: u32, rule: CoefficientRule) -> Result<Self> {
        let mesh = StructuredMesh::new(level)?;
        if level < 2 {
            return Err(Error::SubdomainMisaligned { level });
        }
        let pattern = new_pattern(&mesh);
        let coeffs = rule.coefficients(PARAMETER_DIM);
        let mut operators = Vec::with_capacity(PARAMETER_DIM + 1);
        operators.push(assemble_diffusion_on(&mesh, pattern.clone(), &[1.0; 16])?);
        for (j, &c) in coeffs.iter().enumerate() {
            let mut kappa = [0.0; 16];
            kappa[j] = c;
            operators.push(assemble_diffusion_on(&mesh, pattern.clone(), &kappa)?);
        }
        let mut loads = vec![assemble_constant_load(&mesh, 1.0)];
        loads.extend((0..PARAMETER_DIM).map(|_| DualVector::zeros(level)));
        Ok(Self { mesh, rule, coeffs, operators, loads, bounds: ParameterBox::symmetric_unit(PARAMETER_DIM) })
    }

    pub fn level(&self) -> u32 {
        self.mesh.level()
    }

    pub fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.operators.len() - 1
    }

    pub fn rule(&self) -> CoefficientRule {
        self.rule
    }

    /// `c_1..c_d`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `A_0..A_d`.
    pub fn operators(&self) -> &[SparseOperator] {
        &self.operators
    }

    /// `f_0..f_d`.
    pub fn loads(&self) -> &[DualVector] {
        &self.loads
    }

    pub fn bounds(&self) -> &ParameterBox {
        &self.bounds
    }

    /// Uniform ellipticity bounds `(r, R) = (1 - max c_j, 1 + max c_j)` relative to H^1_0.
    pub fn ellipticity_bounds(&self) -> (f64, f64) {
        let c = self.coeffs.iter().cloned().fold(0.0, f64::max);
        (1.0 - c, 1.0 + c)
    }

    /// `A(y) = A_0 + sum_j y_j A_j`.
    pub fn instantiate(&self, y: &ParameterPoint) -> Result<SparseOperator> {
        self.bounds.check(y)?;
        let mut terms: Vec<(f64, &SparseOperator)> = vec![(1.0, &self.operators[0])];
        terms.extend(y.coords().iter().zip(&self.operators[1..]).map(|(&w, op)| (w, op)));
        SparseOperator::linear_combination(&terms)
    }

    /// `f(y) = f_0 + sum_j y_j f_j`.
    pub fn load(&self, y: &ParameterPoint) -> Result<DualVector> {
        self.bounds.check(y)?;
        let mut f = self.loads[0].clone();
        for (&w, fj) in y.coords().iter().zip(&self.loads[1..]) {
            if w != 0.0 && !fj.is_zero() {
                f.axpy(w, fj)?;
            }
        }
        Ok(f)
    }

    /// Galerkin solution `u_h(y)` on the problem level.
    pub fn solve_forward(&self, y: &ParameterPoint, tol: f64) -> Result<FemVector> {
        let a = self.instantiate(y)?;
        let f = self.load(y)?;
        let solver = SpdSolver::new(&a, SolverKind::Auto, tol).map_err(|e| match e {
            Error::SingularOperator { .. } => Error::LostEllipticity,
            other => other,
        })?;
        solver.solve(&f)
    }

    /// Forward solves for many parameters, in input order.
    pub fn solve_many(&self, ys: &[ParameterPoint], tol: f64) -> Result<Vec<FemVector>> {
        ys.par_iter().map(|y| self.solve_forward(y, tol)).collect()
    }
}

pub fn build_diffusion_problem(level: u32, rule: CoefficientRule) -> Result<AffineParametricProblem> {
    AffineParametricProblem::diffusion(level, rule)
}

/// `n` independent uniform draws from `bounds`, reproducible from `seed` and `stream`.
pub fn sample_parameters_stream(n: usize, seed: u64, stream: u64, bounds: &ParameterBox) -> Vec<ParameterPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n)
        .map(|_| {
            ParameterPoint::new(
                bounds.lower().iter().zip(bounds.upper()).map(|(&l, &u)| rng.gen_range(l..=u)).collect(),
            )
        })
        .collect()
}

pub fn sample_parameters(n: usize, seed: u64, bounds: &ParameterBox) -> Vec<ParameterPoint> {
    sample_parameters_stream(n, seed, 0, bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_h1_gram, LevelSpace};

    fn max_abs_diff(a: &SparseOperator, b: &SparseOperator) -> f64 {
        (0..a.dim()).flat_map(|i| a.row(i).map(move |(j, v)| (i, j, v))).map(|(i, j, v)| (v - b.get(i, j)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn coefficient_rules() {
        let c = CoefficientRule::Decay090.coefficients(16);
        assert_eq!(c[0], 0.9);
        assert!((c[15] - 0.05625).abs() < 1e-16);
        assert_eq!(CoefficientRule::from_leading(0.99).unwrap(), CoefficientRule::Decay099);
        assert!(CoefficientRule::from_leading(0.5).is_err());
    }

    #[test]
    fn indicator_operators_partition_the_laplacian() {
        let p = build_diffusion_problem(3, CoefficientRule::Decay090).unwrap();
        let mut terms: Vec<(f64, &SparseOperator)> = Vec::new();
        for (op, c) in p.operators()[1..].iter().zip(p.coefficients()) {
            terms.push((1.0 / c, op));
        }
        let sum = SparseOperator::linear_combination(&terms).unwrap();
        assert!(max_abs_diff(&sum, &p.operators()[0]) < 1e-13);
        assert!(max_abs_diff(&p.operators()[0], &assemble_h1_gram(p.mesh())) == 0.0);
    }

    #[test]
    fn level_one_is_misaligned() {
        assert!(matches!(
            build_diffusion_problem(1, CoefficientRule::Decay090),
            Err(Error::SubdomainMisaligned { level: 1 })
        ));
    }

    #[test]
    fn instantiate_is_affine() {
        let p = build_diffusion_problem(3, CoefficientRule::Decay099).unwrap();
        let a0 = p.instantiate(&ParameterPoint::zeros(16)).unwrap();
        assert_eq!(max_abs_diff(&a0, &p.operators()[0]), 0.0);
        let a1 = p.instantiate(&ParameterPoint::unit(16, 0)).unwrap();
        let expect = SparseOperator::linear_combination(&[(1.0, &p.operators()[0]), (1.0, &p.operators()[1])]).unwrap();
        assert_eq!(max_abs_diff(&a1, &expect), 0.0);

        let ys = sample_parameters(2, 5, p.bounds());
        let (y, z) = (&ys[0], &ys[1]);
        let mid = ParameterPoint::new(y.coords().iter().zip(z.coords()).map(|(a, b)| 0.25 * a + 0.75 * b).collect());
        let lhs = p.instantiate(&mid).unwrap();
        let rhs = SparseOperator::linear_combination(&[
            (0.25, &p.instantiate(y).unwrap()),
            (0.75, &p.instantiate(z).unwrap()),
        ])
        .unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-13);

        // A(y) - A(0) == sum_j y_j A_j
        let mut terms = vec![(1.0, &lhs), (-1.0, &a0)];
        for (w, op) in mid.coords().iter().zip(&p.operators()[1..]) {
            terms.push((-*w, op));
        }
        let diff = SparseOperator::linear_combination(&terms).unwrap();
        assert!(diff.diagonal().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn out_of_box_parameters_are_rejected() {
        let p = build_diffusion_problem(2, CoefficientRule::Decay090).unwrap();
        let mut y = vec![0.0; 16];
        y[3] = 1.5;
        assert!(matches!(p.instantiate(&ParameterPoint::new(y)), Err(Error::OutOfBox { coord: 3, .. })));
    }

    #[test]
    fn forward_solution_has_small_residual() {
        let p = build_diffusion_problem(4, CoefficientRule::Decay099).unwrap();
        for y in sample_parameters(5, 9, p.bounds()) {
            let u = p.solve_forward(&y, 1e-10).unwrap();
            let a = p.instantiate(&y).unwrap();
            let f = p.load(&y).unwrap();
            let au = a.apply(&u).unwrap();
            let r: f64 = au.coeffs().iter().zip(f.coeffs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(r / f.l2_coeff_norm() <= 1e-10);
        }
    }

    /// Fourier series of `-lap u = 1` on the unit square evaluated at the centre.
    fn poisson_center_series(terms: usize) -> f64 {
        let pi = std::f64::consts::PI;
        let mut sum = 0.0;
        for m in (1..2 * terms).step_by(2) {
            for n in (1..2 * terms).step_by(2) {
                let (mf, nf) = (m as f64, n as f64);
                let coeff = 16.0 / (pi.powi(2) * mf * nf * pi.powi(2) * (mf * mf + nf * nf));
                let s = ((m / 2) % 2 == 0) as i32 * 2 - 1; // sin(m pi / 2)
                let t = ((n / 2) % 2 == 0) as i32 * 2 - 1;
                sum += coeff * (s * t) as f64;
            }
        }
        sum
    }

    #[test]
    fn centre_value_approaches_series_solution() {
        let exact = poisson_center_series(400);
        assert!((exact - 0.07367).abs() < 1e-5, "series gives {exact}");
        let mut errors = Vec::new();
        for s in 3..=6 {
            let p = build_diffusion_problem(s, CoefficientRule::Decay090).unwrap();
            let u = p.solve_forward(&ParameterPoint::zeros(16), 1e-12).unwrap();
            let c = 1usize << (s - 1);
            let centre = u.coeffs()[p.mesh().interior_index((c, c)).unwrap()];
            errors.push((centre - exact).abs());
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        assert!(errors[3] < 1e-3);
    }

    #[test]
    fn mesh_refinement_differences_decrease() {
        let y = sample_parameters(1, 3, &ParameterBox::symmetric_unit(16)).remove(0);
        let sols: Vec<FemVector> = (3..=6)
            .map(|s| build_diffusion_problem(s, CoefficientRule::Decay090).unwrap().solve_forward(&y, 1e-12).unwrap())
            .collect();
        let mut diffs = Vec::new();
        for s in 0..3 {
            let fine = LevelSpace::new(s as u32 + 4, SolverKind::Auto, 1e-12).unwrap();
            let mut d = sols[s + 1].clone();
            d.axpy(-1.0, &crate::fem::prolong(&sols[s], s as u32 + 4).unwrap()).unwrap();
            diffs.push(fine.norm(&d).unwrap());
        }
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    #[test]
    fn sampling_is_reproducible_and_centered() {
        let b = ParameterBox::symmetric_unit(16);
        assert!(sample_parameters(0, 1, &b).is_empty());
        assert_eq!(sample_parameters(20, 42, &b), sample_parameters(20, 42, &b));
        assert_ne!(sample_parameters_stream(5, 42, 0, &b), sample_parameters_stream(5, 42, 1, &b));
        let ys = sample_parameters(100_000, 42, &b);
        for j in 0..16 {
            let mean: f64 = ys.iter().map(|y| y.coords()[j]).sum::<f64>() / ys.len() as f64;
            assert!(mean.abs() < 0.02, "coordinate {j} mean {mean}");
        }
        assert!(ys.iter().all(|y| b.check(y).is_ok()));
    }
}
