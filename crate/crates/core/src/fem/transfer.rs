//! Transfer between nested levels.
//!
//! Prolongation evaluates a coarse P1 function at the vertices of the next
//! finer grid. Restriction of functionals is its exact transpose, so
//! `restrict_dual(r)(z) == r(prolong(z))` for every coarse `z`.

use super::mesh::StructuredMesh;
use super::vector::{DualVector, FemVector};
use crate::error::{Error, Result};

/// Fine vertices that receive a share of coarse vertex `(i, j)` on the next
/// level, relative to `(2i, 2j)`, with their interpolation weights.
const CHILDREN: [(isize, isize, f64); 7] = [
    (0, 0, 1.0),
    (1, 0, 0.5),
    (-1, 0, 0.5),
    (0, 1, 0.5),
    (0, -1, 0.5),
    (1, 1, 0.5),
    (-1, -1, 0.5),
];

fn prolong_once(coarse: &StructuredMesh, v: &[f64]) -> Vec<f64> {
    let fine = StructuredMesh::new(coarse.level() + 1).expect("level bounded by caller");
    let mut out = vec![0.0; fine.interior_count()];
    for (k, &val) in v.iter().enumerate() {
        if val == 0.0 {
            continue;
        }
        let (i, j) = coarse.interior_vertex(k);
        for (dx, dy, w) in CHILDREN {
            let f = ((2 * i) as isize + dx, (2 * j) as isize + dy);
            if let Some(p) = fine.interior_index((f.0 as usize, f.1 as usize)) {
                out[p] += w * val;
            }
        }
    }
    out
}

fn restrict_once(coarse: &StructuredMesh, r: &[f64]) -> Vec<f64> {
    let fine = StructuredMesh::new(coarse.level() + 1).expect("level bounded by caller");
    (0..coarse.interior_count())
        .map(|k| {
            let (i, j) = coarse.interior_vertex(k);
            CHILDREN
                .iter()
                .filter_map(|&(dx, dy, w)| {
                    let f = ((2 * i) as isize + dx, (2 * j) as isize + dy);
                    fine.interior_index((f.0 as usize, f.1 as usize)).map(|p| w * r[p])
                })
                .sum()
        })
        .collect()
}

/// The same piecewise-linear function, represented on level `target > v.level()`.
pub fn prolong(v: &FemVector, target: u32) -> Result<FemVector> {
    if target <= v.level() {
        return Err(Error::LevelMismatch { expected: v.level() + 1, found: target });
    }
    StructuredMesh::new(target)?;
    let mut coeffs = v.coeffs().to_vec();
    for s in v.level()..target {
        coeffs = prolong_once(&StructuredMesh::new(s)?, &coeffs);
    }
    Ok(FemVector::from_raw(target, coeffs))
}

/// Restriction of a functional to the coarser level `target < r.level()`.
pub fn restrict_dual(r: &DualVector, target: u32) -> Result<DualVector> {
    if target >= r.level() || target < 1 {
        return Err(Error::LevelMismatch { expected: r.level().saturating_sub(1), found: target });
    }
    let mut coeffs = r.coeffs().to_vec();
    for s in (target..r.level()).rev() {
        coeffs = restrict_once(&StructuredMesh::new(s)?, &coeffs);
    }
    Ok(DualVector::from_raw(target, coeffs))
}

/// Restriction that is the identity when `target == r.level()`.
pub fn restrict_dual_to(r: &DualVector, target: u32) -> Result<DualVector> {
    if target == r.level() {
        Ok(r.clone())
    } else {
        restrict_dual(r, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sparse::{assemble_constant_load, assemble_h1_gram};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fem(level: u32, rng: &mut ChaCha8Rng) -> FemVector {
        let n = StructuredMesh::new(level).unwrap().interior_count();
        FemVector::new(level, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_dual(level: u32, rng: &mut ChaCha8Rng) -> DualVector {
        let n = StructuredMesh::new(level).unwrap().interior_count();
        DualVector::new(level, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_prolongs_to_zero() {
        assert!(prolong(&FemVector::zeros(2), 5).unwrap().is_zero());
        assert!(restrict_dual(&DualVector::zeros(5), 2).unwrap().is_zero());
    }

    #[test]
    fn wrong_direction_is_rejected() {
        assert!(prolong(&FemVector::zeros(3), 3).is_err());
        assert!(prolong(&FemVector::zeros(3), 2).is_err());
        assert!(restrict_dual(&DualVector::zeros(3), 3).is_err());
        assert!(restrict_dual(&DualVector::zeros(3), 4).is_err());
    }

    #[test]
    fn coarse_values_copied_and_midpoints_averaged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coarse = StructuredMesh::new(3).unwrap();
        let fine = StructuredMesh::new(4).unwrap();
        let v = random_fem(3, &mut rng);
        let pv = prolong(&v, 4).unwrap();
        let val = |m: &StructuredMesh, x: &FemVector, p| m.interior_index(p).map_or(0.0, |k| x.coeffs()[k]);
        for j in 0..=coarse.cells_per_side() {
            for i in 0..=coarse.cells_per_side() {
                assert_eq!(val(&fine, &pv, (2 * i, 2 * j)), val(&coarse, &v, (i, j)));
                if i < coarse.cells_per_side() {
                    let mid = 0.5 * (val(&coarse, &v, (i, j)) + val(&coarse, &v, (i + 1, j)));
                    assert!((val(&fine, &pv, (2 * i + 1, 2 * j)) - mid).abs() < 1e-15);
                }
                if i < coarse.cells_per_side() && j < coarse.cells_per_side() {
                    let mid = 0.5 * (val(&coarse, &v, (i, j)) + val(&coarse, &v, (i + 1, j + 1)));
                    assert!((val(&fine, &pv, (2 * i + 1, 2 * j + 1)) - mid).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn prolongation_preserves_energy_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g2 = assemble_h1_gram(&StructuredMesh::new(2).unwrap());
        let g5 = assemble_h1_gram(&StructuredMesh::new(5).unwrap());
        for _ in 0..5 {
            let v = random_fem(2, &mut rng);
            let w = random_fem(2, &mut rng);
            let coarse = g2.form(&v, &w).unwrap();
            let fine = g5.form(&prolong(&v, 5).unwrap(), &prolong(&w, 5).unwrap()).unwrap();
            assert!((coarse - fine).abs() <= 1e-12 * (1.0 + coarse.abs()));
        }
    }

    #[test]
    fn restriction_is_adjoint_of_prolongation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (s, t) in [(1, 2), (2, 4), (3, 6)] {
            for _ in 0..5 {
                let r = random_dual(t, &mut rng);
                let z = random_fem(s, &mut rng);
                let lhs = restrict_dual(&r, s).unwrap().apply(&z).unwrap();
                let rhs = r.apply(&prolong(&z, t).unwrap()).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * r.l2_coeff_norm() * z.l2_coeff_norm());
            }
        }
    }

    #[test]
    fn restricted_constant_load_is_coarse_constant_load() {
        let fine = StructuredMesh::new(6).unwrap();
        for s in 1..6 {
            let coarse = StructuredMesh::new(s).unwrap();
            let r = restrict_dual(&assemble_constant_load(&fine, 1.0), s).unwrap();
            let direct = assemble_constant_load(&coarse, 1.0);
            for (a, b) in r.coeffs().iter().zip(direct.coeffs()) {
                assert!((a - b).abs() < 1e-14, "level {s}: {a} vs {b}");
            }
        }
    }
}
