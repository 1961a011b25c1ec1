use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::rng;

fn counter_example() -> DenseMatrix {
    DenseMatrix::from_rows(&[[1.0, 0.0], [-0.1, 1.1]]).unwrap()
}

/// O(d²) oracle: average |pearson| over every unordered pair of columns.
fn pairwise_corr(x: &DenseMatrix) -> f64 {
    let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..cols.len() {
        for j in 0..cols.len() {
            if i != j {
                if let Ok(r) = pearson(&cols[i], &cols[j]) {
                    total += r.abs();
                    count += 1;
                }
            }
        }
    }
    total / count as f64
}

#[test]
fn pearson_examples() {
    assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
    assert!(matches!(pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Undefined(_))));
    assert!(pearson(&[1.0], &[1.0]).is_err());
}

#[test]
fn corr_examples() {
    let x = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
    assert!((corr_metric(&x).unwrap().value - 1.0).abs() < 1e-15);
    assert_eq!(corr_metric(&counter_example()).unwrap().value, 1.0);
    let with_constant = DenseMatrix::from_rows(&[[1.0, 5.0, 2.0], [2.0, 5.0, 1.0], [3.0, 5.0, 0.0]]).unwrap();
    let m = corr_metric(&with_constant).unwrap();
    assert_eq!(m.excluded, 1);
    assert!((m.value - 1.0).abs() < 1e-15);
    let degenerate = DenseMatrix::from_rows(&[[1.0, 5.0], [2.0, 5.0]]).unwrap();
    assert!(matches!(corr_metric(&degenerate), Err(Error::Undefined(_))));
}

#[test]
fn corr_matches_pairwise_oracle() {
    let mut r = rng::seeded(17);
    for _ in 0..20 {
        let x = rng::gaussian_matrix(30, 6, &mut r);
        assert!((corr_metric(&x).unwrap().value - pairwise_corr(&x)).abs() < 1e-12);
    }
}

#[test]
fn corr_of_independent_gaussians_is_small() {
    // E|r| for independent columns with n = 100 is about sqrt(2 / (pi (n - 1))) ≈ 0.080
    let mut total = 0.0;
    for seed in 0..20 {
        let mut r = rng::seeded(seed);
        let c = corr_metric(&rng::gaussian_matrix(100, 10, &mut r)).unwrap().value;
        assert!(c < 0.2, "seed {seed}: {c}");
        total += c;
    }
    let mean = total / 20.0;
    assert!((mean - 0.080).abs() < 0.02, "{mean}");
}

#[test]
fn distance_and_smv_examples() {
    assert_eq!(normalized_euclidean(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
    assert!((normalized_euclidean(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    let d = normalized_euclidean(&[1.0, 0.0], &[-0.1, 1.1]).unwrap();
    assert!((d - 0.738).abs() < 5e-4, "{d}");
    assert!(normalized_euclidean(&[0.0, 0.0], &[1.0, 0.0]).is_err());

    let same = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
    assert_eq!(smv(&same).unwrap().value, 0.0);
    assert!((smv(&counter_example()).unwrap().value - 0.738).abs() < 5e-4);
    let basis = DenseMatrix::identity(3);
    assert!((smv(&basis).unwrap().value - 0.5 * core::f64::consts::SQRT_2).abs() < 1e-15);
    let with_zero = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [0.0, 2.0]]).unwrap();
    let m = smv(&with_zero).unwrap();
    assert_eq!(m.excluded, 1);
    assert!(smv(&DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap()).is_err());
}

#[test]
fn sampled_smv_tracks_exact() {
    let mut r = rng::seeded(5);
    let x = rng::gaussian_matrix(200, 8, &mut r);
    let exact = smv(&x).unwrap().value;
    let est = smv_sampled(&x, 50_000, &mut r).unwrap().value;
    assert!((exact - est).abs() < 0.01);
}

#[test]
fn counter_example_is_correlated_not_smooth() {
    let x = counter_example();
    let rep = report(&x, &mut rng::seeded(0));
    assert_eq!(rep.corr, Some(1.0));
    assert!((rep.smv.unwrap() - 0.738).abs() < 1e-3);
    assert!(rep.smv.unwrap() > 0.0);
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols)
        .prop_flat_map(|(n, d)| prop::collection::vec(-10.0..10.0f64, n * d).prop_map(move |v| DenseMatrix::from_vec(n, d, v).unwrap()))
}

proptest! {
    #[test]
    fn pearson_bounded_and_affine(x in prop::collection::vec(-5.0..5.0f64, 3..30), a in -4.0..4.0f64, b in -3.0..3.0f64) {
        prop_assume!(a.abs() > 1e-3);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            prop_assert!((r - a.signum()).abs() < 1e-10);
        }
    }

    #[test]
    fn corr_invariant_under_column_affine_and_row_permutation(
        x in matrix(3..20, 2..8),
        seed in any::<u64>(),
    ) {
        let Ok(base) = corr_metric(&x) else { return Ok(()); };
        prop_assert!((0.0..=1.0).contains(&base.value));
        let mut r = rng::seeded(seed);
        let mut y = x.clone();
        for j in 0..x.cols() {
            let mut a = rng::standard_normal(&mut r) * 3.0;
            if a.abs() < 0.1 { a = 0.5; }
            let b = rng::standard_normal(&mut r) * 5.0;
            for i in 0..x.rows() { y.set(i, j, a * x.get(i, j) + b); }
        }
        let mut perm: Vec<usize> = (0..x.rows()).collect();
        rng::shuffle(&mut perm, &mut r);
        let y = y.gather_rows(&perm).unwrap();
        let moved = corr_metric(&y).unwrap();
        prop_assert!((moved.value - base.value).abs() < 1e-10);
    }

    #[test]
    fn smv_invariant_under_row_scaling_and_permutation(x in matrix(2..20, 1..6), seed in any::<u64>()) {
        let Ok(base) = smv(&x) else { return Ok(()); };
        prop_assert!((0.0..=1.0).contains(&base.value));
        let mut r = rng::seeded(seed);
        let mut y = x.clone();
        for i in 0..x.rows() {
            let s = 0.1 + rng::uniform(&mut r) * 10.0;
            y.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let mut perm: Vec<usize> = (0..x.rows()).collect();
        rng::shuffle(&mut perm, &mut r);
        let y = y.gather_rows(&perm).unwrap();
        prop_assert!((smv(&y).unwrap().value - base.value).abs() < 1e-10);
    }

    #[test]
    fn rank_one_matrices_are_fully_correlated(
        u in prop::collection::vec(-5.0..5.0f64, 3..50),
        v in prop::collection::vec(-5.0..5.0f64, 2..20),
    ) {
        prop_assume!(v.iter().all(|w| w.abs() > 1e-3));
        let spread = u.iter().copied().fold(f64::NEG_INFINITY, f64::max) - u.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let rows: Vec<Vec<f64>> = u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        prop_assert!((corr_metric(&x).unwrap().value - 1.0).abs() < 1e-9);
    }
}

#[test]
fn report_counts_exclusions() {
    let x = DenseMatrix::from_rows(&[[0.0, 1.0, 1.0], [0.0, 2.0, 1.0], [0.0, 0.0, 1.0]]).unwrap();
    let rep = report(&x, &mut rng::seeded(1));
    assert_eq!(rep.excluded_dims, 2);
    assert_eq!(rep.corr, None);
    assert_eq!(rep.excluded_rows, 0);
}

mod study_tests {
    use super::super::study::*;
    use crate::graph::{erdos_renyi, Graph};
    use crate::rng;
    use crate::tensor::DenseMatrix;
    use alloc::vec;

    fn params(k_max: usize, runs: usize) -> PropagationParams {
        PropagationParams {
            dim: 100,
            k_max,
            runs,
            include_lcc: true,
            smv: SmvMode::Exact,
        }
    }

    #[test]
    fn propagation_rises_on_connected_graph() {
        let mut r = rng::seeded(0);
        let g = erdos_renyi(500, 0.02, 1, &mut r).unwrap();
        let pts = propagation_study(&g, &params(30, 3), &mut r).unwrap();
        assert_eq!(pts.len(), 62);
        let full: vec::Vec<_> = pts.iter().filter(|p| p.variant == "full").collect();
        assert!(full[0].corr_mean.unwrap() < 0.15);
        assert!(full[10].corr_mean.unwrap() > full[1].corr_mean.unwrap());
        assert!(full[30].corr_mean.unwrap() > 0.8);
        assert!(full[30].smv_mean.unwrap() < full[0].smv_mean.unwrap());
        assert!(pts.iter().any(|p| p.variant == "lcc"));
    }

    #[test]
    fn propagation_on_edgeless_graph_is_flat() {
        let mut r = rng::seeded(1);
        let g = Graph::new(DenseMatrix::zeros(200, 1), &[], vec![None; 200], 0).unwrap();
        let mut p = params(5, 2);
        p.include_lcc = false;
        let pts = propagation_study(&g, &p, &mut r).unwrap();
        assert_eq!(pts.len(), 6);
        for pt in &pts {
            assert_eq!(pt.corr_mean, pts[0].corr_mean);
        }
        assert_eq!(propagation_study(&g, &params(0, 2), &mut r).unwrap().len(), 2);
        assert!(propagation_study(&g, &PropagationParams { runs: 0, ..params(3, 1) }, &mut r).is_err());
    }

    #[test]
    fn transformation_examples() {
        let mut r = rng::seeded(2);
        let base = TransformationParams {
            nodes: 300,
            k_max: 3,
            runs: 2,
            ..TransformationParams::default()
        };
        let pts = transformation_study(&base, &mut r).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].variant, "relu");
        assert!(pts[0].corr_mean.unwrap() < 0.15);

        let narrow = TransformationParams {
            hidden: 1,
            relu: false,
            ..base.clone()
        };
        let pts = transformation_study(&narrow, &mut r).unwrap();
        assert_eq!(pts[0].variant, "linear");
        // a single column has no pairs, so Corr is undefined past depth 0
        assert!(pts[1..].iter().all(|p| p.corr_mean.is_none() && p.runs == 0));

        let bottleneck = TransformationParams {
            hidden: 1,
            relu: false,
            k_max: 2,
            ..base.clone()
        };
        // widen after the bottleneck: every output column is a multiple of one vector
        let mut x = rng::gaussian_matrix(50, 100, &mut r);
        x = x.matmul(&rng::gaussian_matrix(100, 1, &mut r)).unwrap();
        x = x.matmul(&rng::gaussian_matrix(1, 16, &mut r)).unwrap();
        assert!((crate::metrics::corr_metric(&x).unwrap().value - 1.0).abs() < 1e-9);
        assert!(transformation_study(&TransformationParams { hidden: 0, ..bottleneck }, &mut r).is_err());
    }
}
