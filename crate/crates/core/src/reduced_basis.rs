//! Affine reduced spaces built by greedy snapshot selection, and the PBDW
//! estimator on top of them.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{FemVector, LevelSpace};
use crate::measurement::{smallest_singular_value, MeasurementSpace, SINGULAR_TOL};
use crate::ortho::OrthonormalFamily;

/// A greedy candidate is dropped when its orthogonalized norm falls below
/// this fraction of its original norm.
pub const DROP_TOL: f64 = 1e-10;

/// Below this fraction of the initial squared distance, the cheap update
/// `r^2 - c^2` is replaced by an explicit projection.
const CANCELLATION_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyConfig {
    /// Maximum dimension of the linear part; must stay below `m`.
    pub max_dim: usize,
    /// Absolute target for `eps_est`.
    pub target_eps: f64,
}

/// `V = offset + span(basis)` with an H^1_0-orthonormal basis.
#[derive(Debug, Clone)]
pub struct AffineReducedSpace {
    offset: FemVector,
    basis: OrthonormalFamily,
    picked: Vec<usize>,
    eps_history: Vec<f64>,
    mu: Option<f64>,
}

impl AffineReducedSpace {
    /// Reassembles a stored space. `basis` must already be orthonormal.
    pub fn from_parts(
        space: &LevelSpace,
        offset: FemVector,
        basis: Vec<FemVector>,
        picked: Vec<usize>,
        eps_history: Vec<f64>,
    ) -> Result<Self> {
        offset.check_level(space.level())?;
        let duals = basis.iter().map(|b| space.to_dual(b)).collect::<Result<Vec<_>>>()?;
        Ok(Self { offset, basis: OrthonormalFamily { vectors: basis, duals }, picked, eps_history, mu: None })
    }

    pub fn offset(&self) -> &FemVector {
        &self.offset
    }

    pub fn basis(&self) -> &[FemVector] {
        &self.basis.vectors
    }

    pub fn dim(&self) -> usize {
        self.basis.vectors.len()
    }

    pub fn level(&self) -> u32 {
        self.offset.level()
    }

    /// Indices, into the snapshot slice given to [`greedy_build`], of the picked snapshots.
    pub fn picked(&self) -> &[usize] {
        &self.picked
    }

    /// `eps_est` for dimensions `0..=dim` (shorter if the greedy stopped early).
    pub fn eps_history(&self) -> &[f64] {
        &self.eps_history
    }

    pub fn eps_est(&self) -> f64 {
        self.eps_history.last().copied().unwrap_or(0.0)
    }

    pub(crate) fn remap_picked(&mut self, f: impl Fn(usize) -> usize) {
        self.picked.iter_mut().for_each(|p| *p = f(*p));
    }

    /// Cached inf-sup constant against the measurement space, once computed.
    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    /// `mu * eps_est`, once `mu` is known.
    pub fn sigma_est(&self) -> Option<f64> {
        self.mu.map(|mu| if self.eps_est() == 0.0 { 0.0 } else { mu * self.eps_est() })
    }

    /// Computes and caches `mu(V, W)`; an empty basis has `mu = 1`.
    pub fn attach_measurements(&mut self, ms: &MeasurementSpace) -> Result<f64> {
        if self.dim() >= ms.m() {
            return Err(Error::InvalidArgument(format!(
                "reduced dimension {} must be smaller than the number of measurements {}",
                self.dim(),
                ms.m()
            )));
        }
        let mu = match ms.inf_sup_of_basis(self.basis()) {
            Ok(mu) => mu,
            Err(Error::EmptyBasis) => 1.0,
            Err(e) => return Err(e),
        };
        self.mu = Some(mu);
        Ok(mu)
    }

    /// `||(u - offset) - P_Phi (u - offset)||`.
    pub fn dist_to(&self, space: &LevelSpace, u: &FemVector) -> Result<f64> {
        let r = self.residual(u)?;
        space.norm(&r)
    }

    /// Component of `u - offset` orthogonal to the basis (two MGS sweeps).
    fn residual(&self, u: &FemVector) -> Result<FemVector> {
        u.check_level(self.level())?;
        let mut r = u.clone();
        r.axpy(-1.0, &self.offset)?;
        for _ in 0..2 {
            for (q, gq) in self.basis.vectors.iter().zip(&self.basis.duals) {
                let c = gq.apply(&r)?;
                r.axpy(-c, q)?;
            }
        }
        Ok(r)
    }

    /// Projection `offset + P_Phi (u - offset)` onto the affine space.
    pub fn project(&self, u: &FemVector) -> Result<FemVector> {
        let r = self.residual(u)?;
        let mut p = u.clone();
        p.axpy(-1.0, &r)?;
        Ok(p)
    }

    /// PBDW reconstruction: the state closest to `V` whose measurement is `w`.
    pub fn pbdw_estimate(&self, ms: &MeasurementSpace, w: &[f64]) -> Result<FemVector> {
        if w.len() != ms.m() {
            return Err(Error::DimensionMismatch { expected: ms.m(), found: w.len() });
        }
        let w_off = ms.measure(&self.offset)?;
        let shifted = DVector::from_iterator(w.len(), w.iter().zip(&w_off).map(|(a, b)| a - b));
        let mut estimate = self.offset.clone();
        let mut correction = shifted.clone();
        if self.dim() > 0 {
            if self.dim() > ms.m() {
                return Err(Error::UnstableEstimate);
            }
            let c = ms.cross_gramian(self.basis())?;
            if smallest_singular_value(&c) < SINGULAR_TOL {
                return Err(Error::UnstableEstimate);
            }
            let qr = c.clone().qr();
            let rhs = qr.q().transpose() * &shifted;
            let a = qr.r().solve_upper_triangular(&rhs).ok_or(Error::UnstableEstimate)?;
            for (aj, phi) in a.iter().zip(self.basis()) {
                estimate.axpy(*aj, phi)?;
            }
            correction -= &c * &a;
        }
        for (ci, q) in correction.iter().zip(ms.basis()) {
            estimate.axpy(*ci, q)?;
        }
        Ok(estimate)
    }
}

/// Arithmetic mean of a nonempty set of vectors on one level.
pub fn mean(snapshots: &[&FemVector]) -> Result<FemVector> {
    let first = snapshots.first().ok_or(Error::EmptyTrainingSet)?;
    let mut out = FemVector::zeros(first.level());
    for s in snapshots {
        out.axpy(1.0, s)?;
    }
    out.scale(1.0 / snapshots.len() as f64);
    Ok(out)
}

/// Greedy reduced space for `snapshots` around `offset`.
///
/// Each step adds the snapshot whose distance to the current space is
/// largest (lowest index on ties) until `eps_est <= target_eps` or the
/// dimension reaches `max_dim`.
pub fn greedy_build(
    space: &LevelSpace,
    snapshots: &[&FemVector],
    offset: FemVector,
    config: &GreedyConfig,
) -> Result<AffineReducedSpace> {
    if snapshots.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(config.target_eps >= 0.0) {
        return Err(Error::InvalidArgument("target_eps must be non-negative".into()));
    }
    offset.check_level(space.level())?;
    for s in snapshots {
        s.check_level(space.level())?;
    }
    let initial: Vec<f64> = snapshots
        .par_iter()
        .map(|u| {
            let mut d = (*u).clone();
            d.axpy(-1.0, &offset)?;
            Ok(space.inner(&d, &d)?.max(0.0))
        })
        .collect::<Result<_>>()?;
    let mut res2 = initial.clone();
    let mut basis = OrthonormalFamily::default();
    let mut picked = Vec::new();
    let mut eps_history = Vec::new();

    loop {
        let (p, max2) = res2
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let eps = max2.max(0.0).sqrt();
        eps_history.push(eps);
        if eps <= config.target_eps || basis.len() >= config.max_dim {
            break;
        }
        let mut candidate = snapshots[p].clone();
        candidate.axpy(-1.0, &offset)?;
        if !basis.try_push(space, candidate, DROP_TOL)? {
            break;
        }
        picked.push(p);
        let gphi = basis.duals.last().expect("just pushed");
        let phi_off = gphi.apply(&offset)?;
        let basis_ref = &basis;
        res2 = snapshots
            .par_iter()
            .zip(res2.par_iter().zip(initial.par_iter()))
            .map(|(u, (&old, &init))| {
                let c = gphi.apply(u)? - phi_off;
                let cheap = (old - c * c).max(0.0);
                let updated = if cheap < CANCELLATION_GUARD * init {
                    let mut r = (*u).clone();
                    r.axpy(-1.0, &offset)?;
                    for _ in 0..2 {
                        for (q, gq) in basis_ref.vectors.iter().zip(&basis_ref.duals) {
                            let c = gq.apply(&r)?;
                            r.axpy(-c, q)?;
                        }
                    }
                    space.inner(&r, &r)?.max(0.0)
                } else {
                    cheap
                };
                // distances to a growing space cannot increase
                Ok(updated.min(old))
            })
            .collect::<Result<_>>()?;
    }
    Ok(AffineReducedSpace { offset, basis, picked, eps_history, mu: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{SolverKind, StructuredMesh};
    use crate::measurement::make_measurements;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LEVEL: u32 = 4;

    fn space() -> LevelSpace {
        LevelSpace::new(LEVEL, SolverKind::Auto, 1e-12).unwrap()
    }

    fn random_fem(rng: &mut ChaCha8Rng) -> FemVector {
        let n = StructuredMesh::new(LEVEL).unwrap().interior_count();
        FemVector::new(LEVEL, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn cfg(max_dim: usize) -> GreedyConfig {
        GreedyConfig { max_dim, target_eps: 0.0 }
    }

    #[test]
    fn first_pick_is_farthest_from_offset() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let snaps: Vec<FemVector> = (0..6).map(|_| random_fem(&mut rng)).collect();
        let refs: Vec<&FemVector> = snaps.iter().collect();
        let offset = mean(&refs).unwrap();
        let v = greedy_build(&sp, &refs, offset.clone(), &cfg(3)).unwrap();
        let dists: Vec<f64> = snaps
            .iter()
            .map(|u| {
                let mut d = u.clone();
                d.axpy(-1.0, &offset).unwrap();
                sp.norm(&d).unwrap()
            })
            .collect();
        let argmax = (0..6).max_by(|&a, &b| dists[a].total_cmp(&dists[b])).unwrap();
        assert_eq!(v.picked()[0], argmax);
        assert!((v.eps_history()[0] - dists[argmax]).abs() < 1e-12 * dists[argmax]);
        assert_eq!(v.dim(), 3);
        assert_eq!(v.eps_history().len(), 4);
    }

    #[test]
    fn collinear_snapshots_need_one_step() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let offset = random_fem(&mut rng);
        let dir = random_fem(&mut rng);
        let snaps: Vec<FemVector> = [0.3, -1.2, 2.5]
            .iter()
            .map(|&t| {
                let mut u = offset.clone();
                u.axpy(t, &dir).unwrap();
                u
            })
            .collect();
        let refs: Vec<&FemVector> = snaps.iter().collect();
        let v = greedy_build(&sp, &refs, offset, &cfg(5)).unwrap();
        assert_eq!(v.picked(), &[2]);
        assert!(v.eps_history()[1] <= 1e-10, "{:?}", v.eps_history());
        assert_eq!(v.dim(), 1);
    }

    #[test]
    fn snapshots_equal_to_offset_give_empty_basis() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_fem(&mut rng);
        let refs = vec![&u, &u, &u];
        let v = greedy_build(&sp, &refs, u.clone(), &cfg(4)).unwrap();
        assert_eq!(v.dim(), 0);
        assert_eq!(v.eps_est(), 0.0);
        assert!(matches!(greedy_build(&sp, &[], u, &cfg(4)), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn greedy_history_is_monotone_and_basis_orthonormal() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let snaps: Vec<FemVector> = (0..20).map(|_| random_fem(&mut rng)).collect();
        let refs: Vec<&FemVector> = snaps.iter().collect();
        let v = greedy_build(&sp, &refs, mean(&refs).unwrap(), &cfg(7)).unwrap();
        assert!(v.eps_history().windows(2).all(|w| w[1] <= w[0]));
        for (i, a) in v.basis().iter().enumerate() {
            for (j, b) in v.basis().iter().enumerate() {
                let g = sp.inner(a, b).unwrap();
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        // eps_est is the max distance over the training snapshots
        let max_dist = snaps.iter().map(|u| v.dist_to(&sp, u).unwrap()).fold(0.0, f64::max);
        assert!((max_dist - v.eps_est()).abs() < 1e-10 * max_dist);
    }

    #[test]
    fn target_eps_stops_early() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let snaps: Vec<FemVector> = (0..10).map(|_| random_fem(&mut rng)).collect();
        let refs: Vec<&FemVector> = snaps.iter().collect();
        let full = greedy_build(&sp, &refs, mean(&refs).unwrap(), &cfg(7)).unwrap();
        let target = full.eps_history()[3] * 1.000001;
        let v = greedy_build(&sp, &refs, mean(&refs).unwrap(), &GreedyConfig { max_dim: 7, target_eps: target })
            .unwrap();
        assert_eq!(v.dim(), 3);
    }

    #[test]
    fn distance_identities() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let snaps: Vec<FemVector> = (0..8).map(|_| random_fem(&mut rng)).collect();
        let refs: Vec<&FemVector> = snaps.iter().collect();
        let v = greedy_build(&sp, &refs, mean(&refs).unwrap(), &cfg(3)).unwrap();
        assert!(v.dist_to(&sp, v.offset()).unwrap() < 1e-14);
        let mut u = v.offset().clone();
        u.axpy(1.0, &v.basis()[0]).unwrap();
        assert!(v.dist_to(&sp, &u).unwrap() < 1e-12);

        let mut z = random_fem(&mut rng);
        for phi in v.basis() {
            let c = sp.inner(phi, &z).unwrap();
            z.axpy(-c, phi).unwrap();
        }
        let mut u = v.offset().clone();
        u.axpy(1.0, &z).unwrap();
        let zn = sp.norm(&z).unwrap();
        assert!((v.dist_to(&sp, &u).unwrap() - zn).abs() < 1e-10 * zn);
        assert!(v.dist_to(&sp, &FemVector::zeros(3)).is_err());
    }

    #[test]
    fn pbdw_recovers_states_in_the_space() {
        let sp = space();
        let ms = make_measurements(&sp, 8, 1.0 / 16.0, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let snaps: Vec<FemVector> = (0..12).map(|_| random_fem(&mut rng)).collect();
        let refs: Vec<&FemVector> = snaps.iter().collect();
        let mut v = greedy_build(&sp, &refs, mean(&refs).unwrap(), &cfg(4)).unwrap();
        let mu = v.attach_measurements(&ms).unwrap();
        assert!(mu.is_finite() && mu >= 1.0);
        for _ in 0..3 {
            let mut u = v.offset().clone();
            for phi in v.basis() {
                u.axpy(rng.gen_range(-2.0..2.0), phi).unwrap();
            }
            let est = v.pbdw_estimate(&ms, &ms.measure(&u).unwrap()).unwrap();
            let mut err = est.clone();
            err.axpy(-1.0, &u).unwrap();
            assert!(sp.norm(&err).unwrap() <= 1e-8 * sp.norm(&u).unwrap());
        }
        // consistency for an arbitrary state, and the linear error bound per state
        let u = random_fem(&mut rng);
        let w = ms.measure(&u).unwrap();
        let est = v.pbdw_estimate(&ms, &w).unwrap();
        let w2 = ms.measure(&est).unwrap();
        assert!(w.iter().zip(&w2).all(|(a, b)| (a - b).abs() < 1e-8));
        let mut err = est;
        err.axpy(-1.0, &u).unwrap();
        assert!(sp.norm(&err).unwrap() <= mu * v.dist_to(&sp, &u).unwrap() * (1.0 + 1e-6));
    }

    #[test]
    fn pbdw_with_empty_basis_adds_the_measured_correction() {
        let sp = space();
        let ms = make_measurements(&sp, 5, 1.0 / 16.0, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let offset = random_fem(&mut rng);
        let mut v = greedy_build(&sp, &[&offset], offset.clone(), &cfg(3)).unwrap();
        assert_eq!(v.attach_measurements(&ms).unwrap(), 1.0);
        let u = random_fem(&mut rng);
        let est = v.pbdw_estimate(&ms, &ms.measure(&u).unwrap()).unwrap();
        let mut diff = u.clone();
        diff.axpy(-1.0, &offset).unwrap();
        let mut expect = offset.clone();
        expect.axpy(1.0, &ms.reconstruct(&ms.measure(&diff).unwrap()).unwrap()).unwrap();
        let mut gap = est;
        gap.axpy(-1.0, &expect).unwrap();
        assert!(sp.norm(&gap).unwrap() < 1e-10);
    }

    #[test]
    fn unstable_space_is_reported() {
        let sp = space();
        let ms = make_measurements(&sp, 3, 1.0 / 16.0, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_fem(&mut rng);
        let mut perp = u.clone();
        perp.axpy(-1.0, &ms.reconstruct(&ms.measure(&u).unwrap()).unwrap()).unwrap();
        let offset = FemVector::zeros(LEVEL);
        let mut v = greedy_build(&sp, &[&perp], offset, &cfg(1)).unwrap();
        assert_eq!(v.dim(), 1);
        assert_eq!(v.attach_measurements(&ms).unwrap(), f64::INFINITY);
        assert!(matches!(v.pbdw_estimate(&ms, &[0.0; 3]), Err(Error::UnstableEstimate)));
        assert!(matches!(v.pbdw_estimate(&ms, &[0.0; 2]), Err(Error::DimensionMismatch { .. })));
    }
}
