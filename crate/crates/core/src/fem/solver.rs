use super::sparse::SparseOperator;
use super::vector::{dot, DualVector, FemVector};
use crate::error::{Error, Result};

/// Which factorization backs an [`SpdSolver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Banded Cholesky unless the band storage would exceed [`BAND_MEMORY_LIMIT`].
    #[default]
    Auto,
    BandedCholesky,
    ConjugateGradient,
}

/// Upper bound on band storage for the direct path, in bytes.
pub const BAND_MEMORY_LIMIT: usize = 1 << 30;

/// Lower-triangular band factor `L` with `A = L L^T`.
///
/// Row `i` stores `L[i][i-b..=i]` contiguously, left-padded with zeros for the
/// first `b` rows.
#[derive(Debug, Clone)]
struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    fn factor(op: &SparseOperator) -> Result<Self> {
        let n = op.dim();
        let bw = op.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in op.row(i) {
                if j <= i {
                    band[i * w + bw - (i - j)] = v;
                }
            }
        }
        let diag_scale = (0..n).map(|i| op.get(i, i).abs()).fold(0.0, f64::max);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let k0 = lo.max(j.saturating_sub(bw));
                // L[i][k0..j] and L[j][k0..j]
                let ri = i * w + bw - (i - k0);
                let rj = j * w + bw - (j - k0);
                let len = j - k0;
                let s = band[i * w + bw - (i - j)] - dot(&band[ri..ri + len], &band[rj..rj + len]);
                if i == j {
                    if !(s > f64::EPSILON * diag_scale * 1e-4) || !s.is_finite() {
                        return Err(Error::SingularOperator { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + bw - (i - j)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        // forward: L y = b
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let len = i - lo;
            let r = i * w + bw - len;
            let s = x[i] - dot(&self.band[r..r + len], &x[lo..i]);
            x[i] = s / self.band[i * w + bw];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let xi = x[i] / self.band[i * w + bw];
            x[i] = xi;
            let lo = i.saturating_sub(bw);
            for (k, l) in (lo..i).zip(&self.band[i * w + bw - (i - lo)..i * w + bw]) {
                x[k] -= l * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Banded(BandCholesky),
    Cg { op: SparseOperator, inv_diag: Vec<f64>, tol: f64, max_iter: usize },
}

/// A reusable solver for one SPD operator.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    level: u32,
    backend: Backend,
}

impl SpdSolver {
    pub fn new(op: &SparseOperator, kind: SolverKind, tol: f64) -> Result<Self> {
        let n = op.dim();
        let band_bytes = n.saturating_mul(op.bandwidth() + 1).saturating_mul(8);
        let direct = match kind {
            SolverKind::Auto => band_bytes <= BAND_MEMORY_LIMIT,
            SolverKind::BandedCholesky => true,
            SolverKind::ConjugateGradient => false,
        };
        let backend = if direct {
            Backend::Banded(BandCholesky::factor(op)?)
        } else {
            let diag = op.diagonal();
            if let Some(row) = diag.iter().position(|&d| !(d > 0.0)) {
                return Err(Error::SingularOperator { row, pivot: diag[row] });
            }
            Backend::Cg {
                op: op.clone(),
                inv_diag: diag.iter().map(|d| d.recip()).collect(),
                tol,
                max_iter: 10 * n + 100,
            }
        };
        Ok(Self { level: op.level(), backend })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Banded(_))
    }

    pub fn solve(&self, rhs: &DualVector) -> Result<FemVector> {
        rhs.check_level(self.level)?;
        let x = self.solve_raw(rhs.coeffs())?;
        Ok(FemVector::from_raw(self.level, x))
    }

    pub fn solve_raw(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Banded(f) => {
                let mut x = rhs.to_vec();
                f.solve_in_place(&mut x);
                Ok(x)
            }
            Backend::Cg { op, inv_diag, tol, max_iter } => pcg(op, inv_diag, rhs, *tol, *max_iter),
        }
    }
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
fn pcg(op: &SparseOperator, inv_diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for _ in 0..max_iter {
        op.matvec_raw(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularOperator { row: 0, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: res })
}

/// One-shot SPD solve of `op x = rhs`.
pub fn solve_spd(op: &SparseOperator, rhs: &DualVector, tol: f64) -> Result<FemVector> {
    if op.level() != rhs.level() {
        return Err(Error::LevelMismatch { expected: op.level(), found: rhs.level() });
    }
    SpdSolver::new(op, SolverKind::Auto, tol)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_mesh;
    use crate::fem::sparse::{assemble_diffusion_stiffness, assemble_h1_gram};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_residual(op: &SparseOperator, x: &FemVector, b: &DualVector) -> f64 {
        let ax = op.apply(x).unwrap();
        let r: Vec<f64> = ax.coeffs().iter().zip(b.coeffs()).map(|(a, b)| a - b).collect();
        dot(&r, &r).sqrt() / b.l2_coeff_norm()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = assemble_h1_gram(&build_mesh(3).unwrap());
        for kind in [SolverKind::BandedCholesky, SolverKind::ConjugateGradient] {
            let x = SpdSolver::new(&g, kind, 1e-10).unwrap().solve(&DualVector::zeros(3)).unwrap();
            assert!(x.is_zero());
        }
    }

    #[test]
    fn one_by_one_system() {
        let g = assemble_h1_gram(&build_mesh(1).unwrap());
        let x = solve_spd(&g, &DualVector::new(1, vec![3.0]).unwrap(), 1e-10).unwrap();
        assert_eq!(x.coeffs(), &[0.75]);
    }

    #[test]
    fn recovers_manufactured_solution_with_both_backends() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in 2..=5 {
            let mesh = build_mesh(s).unwrap();
            let mut kappa = [0.0; 16];
            kappa.iter_mut().for_each(|k| *k = rng.gen_range(0.1..2.0));
            let a = assemble_diffusion_stiffness(&mesh, &kappa).unwrap();
            let v = FemVector::new(s, (0..mesh.interior_count()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let b = a.apply(&v).unwrap();
            for kind in [SolverKind::BandedCholesky, SolverKind::ConjugateGradient] {
                let x = SpdSolver::new(&a, kind, 1e-12).unwrap().solve(&b).unwrap();
                assert!(rel_residual(&a, &x, &b) <= 1e-10, "level {s} {kind:?}");
                let err = x.coeffs().iter().zip(v.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-8, "level {s} {kind:?}: {err}");
            }
        }
    }

    #[test]
    fn indefinite_operator_is_rejected() {
        let g = assemble_h1_gram(&build_mesh(2).unwrap()).scaled(-1.0);
        assert!(matches!(
            SpdSolver::new(&g, SolverKind::BandedCholesky, 1e-10),
            Err(Error::SingularOperator { .. })
        ));
        assert!(matches!(
            SpdSolver::new(&g, SolverKind::ConjugateGradient, 1e-10),
            Err(Error::SingularOperator { .. })
        ));
    }

    #[test]
    fn level_mismatch_is_reported() {
        let g = assemble_h1_gram(&build_mesh(2).unwrap());
        assert!(matches!(
            solve_spd(&g, &DualVector::zeros(3), 1e-10),
            Err(Error::LevelMismatch { expected: 2, found: 3 })
        ));
    }
}
