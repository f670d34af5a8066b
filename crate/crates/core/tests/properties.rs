use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use surrosel::fem::{assemble_h1_gram, prolong, restrict_dual};
use surrosel::pipeline::argmin_lowest;
use surrosel::surrogate::{minimize_box, BoxQuadratic};
use surrosel::{DualVector, FemVector, StructuredMesh};

fn vec_for(level: u32, seed: &[f64]) -> Vec<f64> {
    let n = StructuredMesh::new(level).unwrap().interior_count();
    (0..n).map(|i| seed[i % seed.len()] * ((i * 7 + 3) % 11) as f64 / 11.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restriction_is_adjoint_to_prolongation(
        coarse in 1u32..4, gap in 1u32..3,
        a in prop::collection::vec(-1.0f64..1.0, 1..20),
        b in prop::collection::vec(-1.0f64..1.0, 1..20),
    ) {
        let fine = coarse + gap;
        let z = FemVector::new(coarse, vec_for(coarse, &a)).unwrap();
        let r = DualVector::new(fine, vec_for(fine, &b)).unwrap();
        let lhs = restrict_dual(&r, coarse).unwrap().apply(&z).unwrap();
        let rhs = r.apply(&prolong(&z, fine).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn gram_form_is_symmetric_and_bilinear(
        level in 1u32..5, alpha in -3.0f64..3.0,
        a in prop::collection::vec(-1.0f64..1.0, 1..20),
        b in prop::collection::vec(-1.0f64..1.0, 1..20),
    ) {
        let g = assemble_h1_gram(&StructuredMesh::new(level).unwrap());
        let u = FemVector::new(level, vec_for(level, &a)).unwrap();
        let v = FemVector::new(level, vec_for(level, &b)).unwrap();
        let uv = g.form(&u, &v).unwrap();
        assert_relative_eq!(uv, g.form(&v, &u).unwrap(), epsilon = 1e-12);
        let mut w = u.clone();
        w.axpy(alpha, &v).unwrap();
        let lin = g.form(&w, &v).unwrap();
        assert_relative_eq!(lin, uv + alpha * g.form(&v, &v).unwrap(), epsilon = 1e-10, max_relative = 1e-10);
        prop_assert!(g.form(&u, &u).unwrap() >= 0.0);
    }

    #[test]
    fn box_qp_beats_every_probe(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        b in prop::collection::vec(-2.0f64..2.0, 3),
        probe in prop::collection::vec(-1.0f64..=1.0, 3),
    ) {
        let a = DMatrix::from_row_slice(3, 3, &entries);
        let q = &a * a.transpose();
        let qp = BoxQuadratic::new(
            q, DVector::from_vec(b), 10.0,
            DVector::from_element(3, -1.0), DVector::from_element(3, 1.0),
        ).unwrap();
        let sol = minimize_box(&qp);
        prop_assert!(sol.y.iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(sol.value <= qp.value(&DVector::from_vec(probe)).max(0.0) + 1e-10);
    }

    #[test]
    fn selection_is_scale_invariant(
        values in prop::collection::vec(0.0f64..1.0, 1..10), k in -20i32..20,
    ) {
        // powers of two keep the ordering exact
        let scale = 2f64.powi(k);
        let pairs: Vec<(usize, f64)> = values.iter().copied().enumerate().collect();
        let scaled: Vec<(usize, f64)> = pairs.iter().map(|&(k, v)| (k, v * scale)).collect();
        prop_assert_eq!(argmin_lowest(&pairs).map(|p| p.0), argmin_lowest(&scaled).map(|p| p.0));
    }
}
