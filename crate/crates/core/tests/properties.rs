mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use seislabel::corpus::Patch;
use seislabel::curvelet::CurveletTransform;
use seislabel::features::{effective_rank, feature_vector, similarity, FeatureExtractor, FeatureVector};
use seislabel::labelmap::{
    extract_labels, hoyer_project, median_filter_labels, objective, sparsity, update_h, update_w,
    MembershipMatrix, ObjectivePart,
};

fn matrix(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(0.0f64..1.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
}

/// Matrix with roughly a third of its entries set to exact zero.
fn sparse_matrix(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0f64), 2 => 0.01f64..1.0], r * c)
        .prop_map(move |v| DMatrix::from_vec(r, c, v))
}

fn patch(side: usize) -> impl Strategy<Value = Patch> {
    prop::collection::vec(0.0f32..=1.0, side * side).prop_map(move |v| Patch::new(side, side, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_symmetric_bounded_reflexive(
        a in prop::collection::vec(0.0f64..10.0, 12),
        b in prop::collection::vec(0.0f64..10.0, 12),
    ) {
        prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0);
        let va = FeatureVector::flat(a).unwrap();
        let vb = FeatureVector::flat(b).unwrap();
        let s = similarity(&va, &vb).unwrap();
        prop_assert_eq!(s, similarity(&vb, &va).unwrap());
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((similarity(&va, &va).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn effective_rank_bounds_and_scale(
        sigma in prop::collection::vec(0.0f64..5.0, 1..40),
        c in 1e-3f64..1e3,
    ) {
        prop_assume!(sigma.iter().sum::<f64>() > 0.0);
        let er = effective_rank(&sigma).unwrap();
        prop_assert!(er >= 1.0 && er <= sigma.len() as f64);
        let scaled: Vec<f64> = sigma.iter().map(|s| s * c).collect();
        prop_assert!((effective_rank(&scaled).unwrap() - er).abs() <= 1e-12 * sigma.len() as f64);
    }

    #[test]
    fn updates_keep_sign_and_zero_pattern(
        x in matrix(10, 8),
        w in sparse_matrix(10, 4),
        h in sparse_matrix(4, 8),
    ) {
        let w1 = update_w(&w, &h, &x, 0.1, 1e-12).unwrap();
        let h1 = update_h(&w1, &h, &x, 5.0, 0.5, 1e-12).unwrap();
        prop_assert!(w1.iter().all(|&v| v >= 0.0));
        prop_assert!(h1.iter().all(|&v| v >= 0.0));
        for (a, b) in w.iter().zip(w1.iter()) {
            prop_assert_eq!(*a == 0.0, *b == 0.0);
        }
        for (a, b) in h.iter().zip(h1.iter()) {
            prop_assert_eq!(*a == 0.0, *b == 0.0);
        }
    }

    #[test]
    fn w_update_does_not_raise_w_objective(
        x in matrix(10, 8),
        w in matrix(10, 4),
        h in matrix(4, 8),
    ) {
        let before = objective(&x, &w, &h, 5.0, 0.1, 0.5, ObjectivePart::WPart).unwrap();
        let w1 = update_w(&w, &h, &x, 0.1, 1e-12).unwrap();
        let after = objective(&x, &w1, &h, 5.0, 0.1, 0.5, ObjectivePart::WPart).unwrap();
        prop_assert!(after <= before + 1e-9, "{} -> {}", before, after);
    }

    #[test]
    fn labels_invariant_to_scaling_confident_coefficients(
        w in matrix(12, 6),
        h in matrix(6, 3),
        c in 1.0f64..4.0,
        n in 0usize..3,
    ) {
        let q = MembershipMatrix::new(vec![1, 1, 2, 2, 3, 3], 3).unwrap();
        let tau = 0.2;
        let base = extract_labels(&w, &h, &q, tau).unwrap();
        let mut h2 = h.clone();
        h2.column_mut(n).scale_mut(c);
        let scaled = extract_labels(&w, &h2, &q, tau).unwrap();
        for i in 0..12 {
            if base.confidence[n][i] >= tau {
                prop_assert_eq!(base.labels[n][i], scaled.labels[n][i]);
            }
        }
    }

    #[test]
    fn hoyer_projection_reaches_target(
        v in prop::collection::vec(0.0f64..1.0, 2..60),
        rho in 0.05f64..0.95,
    ) {
        prop_assume!(v.iter().any(|&x| x > 1e-3));
        let p = hoyer_project(&v, rho).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((sparsity(&p).unwrap() - rho).abs() < 1e-6);
    }

    #[test]
    fn median_filter_matches_sorting_oracle(
        (w, h, y) in (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(0u8..4, w * h))
        })
    ) {
        prop_assert_eq!(median_filter_labels(&y, w, h).unwrap(), common::median3x3(&y, w, h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn curvelet_is_linear(a in patch(32), b in patch(32), alpha in -2.0f64..2.0) {
        let t = CurveletTransform::new(32, 32).unwrap();
        let xa = a.to_f64();
        let xb = b.to_f64();
        let mix: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| alpha * p + q).collect();
        let ca = t.forward_values(&xa).unwrap();
        let cb = t.forward_values(&xb).unwrap();
        let cm = t.forward_values(&mix).unwrap();
        for ((wa, wb), wm) in ca.wedges.iter().zip(&cb.wedges).zip(&cm.wedges) {
            for ((u, v), m) in wa.coeffs.iter().zip(wb.coeffs.iter()).zip(wm.coeffs.iter()) {
                prop_assert!((u * alpha + v - m).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn features_scale_linearly(p in patch(32)) {
        prop_assume!(p.pixels().iter().any(|&v| v > 0.01));
        let half = Patch::new(32, 32, p.pixels().iter().map(|v| v * 0.5).collect()).unwrap();
        let ex = FeatureExtractor::new(32, 32).unwrap();
        let f = ex.extract(&p).unwrap();
        let g = ex.extract(&half).unwrap();
        let one_off = feature_vector(&half).unwrap();
        prop_assert_eq!(f.layout(), one_off.layout());
        for (a, b) in f.values().iter().zip(g.values()) {
            prop_assert!((0.5 * a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
