use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::gradcheck::{check_gradients, Tolerance};
use super::*;
use crate::rng;

fn m(rows: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(rows).unwrap()
}

fn assert_fd<F>(params: &[DenseMatrix], f: F)
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let report = check_gradients(params, Tolerance::default(), f).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn elementwise_examples() {
    let mut t = Tape::new();
    let a = t.constant(m(&[&[-1.0, 2.0]]));
    let r = t.relu(a).unwrap();
    assert_eq!(t.value(r), &m(&[&[0.0, 2.0]]));
    let z = t.constant(m(&[&[0.0]]));
    let s = t.sigmoid(z).unwrap();
    assert_eq!(t.value(s).item(), Some(0.5));
    let mut r0 = rng::seeded(0);
    let x = t.constant(rng::gaussian_matrix(3, 2, &mut r0));
    let neg = t.scale(x, -1.0).unwrap();
    let sum = t.add(x, neg).unwrap();
    assert_eq!(t.value(sum), &DenseMatrix::zeros(3, 2));
    assert!(matches!(t.elementwise(Elementwise::Add, x, None), Err(Error::InvalidArgument(_))));
    let other = t.constant(DenseMatrix::zeros(2, 2));
    assert!(matches!(t.add(x, other), Err(Error::Shape { .. })));
}

#[test]
fn xent_examples() {
    let labels = [Some(0)];
    let loss = softmax_cross_entropy(&m(&[&[0.0, 0.0]]), &labels, &[0]).unwrap();
    assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
    let loss = softmax_cross_entropy(&m(&[&[1000.0, 0.0]]), &labels, &[0]).unwrap();
    assert!(loss.is_finite() && loss.abs() < 1e-300);
    assert!(softmax_cross_entropy(&m(&[&[0.0, 0.0]]), &labels, &[]).is_err());
    assert!(softmax_cross_entropy(&m(&[&[0.0, 0.0]]), &[Some(2)], &[0]).is_err());
    assert!(softmax_cross_entropy(&m(&[&[0.0, 0.0]]), &[None], &[0]).is_err());
}

#[test]
fn xent_matches_direct_formula() {
    let mut r = rng::seeded(4);
    let logits = rng::gaussian_matrix(4, 3, &mut r);
    let labels = [Some(2), Some(0), Some(1), Some(1)];
    let mask = [0, 1, 2, 3];
    // direct softmax then log, without any shift
    let mut oracle = 0.0;
    for (i, l) in labels.iter().enumerate() {
        let z = logits.row(i);
        let denom: f64 = z.iter().map(|v| libm::exp(*v)).sum();
        oracle -= libm::log(libm::exp(z[l.unwrap()]) / denom);
    }
    oracle /= 4.0;
    let loss = softmax_cross_entropy(&logits, &labels, &mask).unwrap();
    assert!((loss - oracle).abs() < 1e-14);
}

#[test]
fn xent_is_shift_invariant_and_nonnegative() {
    let mut r = rng::seeded(5);
    for _ in 0..20 {
        let logits = rng::gaussian_matrix(5, 4, &mut r).scale(3.0);
        let labels: Vec<_> = (0..5).map(|i| Some(i % 4)).collect();
        let mask = [0, 2, 3, 4];
        let base = softmax_cross_entropy(&logits, &labels, &mask).unwrap();
        let shifted = logits.map(|v| v + 17.5);
        let moved = softmax_cross_entropy(&shifted, &labels, &mask).unwrap();
        assert!(base >= 0.0);
        assert!((base - moved).abs() < 1e-10);
    }
}

#[test]
fn dropout_contract() {
    let mut r = rng::seeded(2);
    let mut t = Tape::new();
    let x = t.constant(DenseMatrix::filled(1000, 10, 1.0));
    assert_eq!(t.dropout(x, 0.0, &mut r, true).unwrap(), x);
    assert_eq!(t.dropout(x, 0.5, &mut r, false).unwrap(), x);
    assert!(t.dropout(x, 1.0, &mut r, true).is_err());
    assert!(t.dropout(x, -0.1, &mut r, true).is_err());
    let d = t.dropout(x, 0.6, &mut r, true).unwrap();
    let mean = t.value(d).sum() / 10_000.0;
    assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    let zeros = t.value(d).data().iter().filter(|v| **v == 0.0).count() as f64 / 10_000.0;
    assert!((zeros - 0.6).abs() < 0.03);
}

#[test]
fn backward_examples() {
    let mut t = Tape::new();
    let w = t.param(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let untouched = t.param(m(&[&[5.0]]));
    let s = t.sum(w).unwrap();
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(w), DenseMatrix::filled(2, 2, 1.0));
    assert_eq!(g.get(untouched), DenseMatrix::zeros(1, 1));

    let sq = t.frobenius(w).unwrap();
    let sq = t.mul(sq, sq).unwrap();
    let g = t.backward(sq).unwrap();
    assert!(g.get(w).max_abs_diff(&t.value(w).scale(2.0)) < 1e-12);

    assert!(matches!(t.backward(w), Err(Error::NotScalar(_))));
    assert!(matches!(t.backward(Var(999)), Err(Error::UnknownVar(999))));
}

#[test]
fn gradients_sum_over_consumers() {
    let mut t = Tape::new();
    let w = t.param(m(&[&[2.0]]));
    let a = t.scale(w, 3.0).unwrap();
    let b = t.add(a, w).unwrap();
    let g = t.backward(b).unwrap();
    assert_eq!(g.get(w).item(), Some(4.0));
}

#[test]
fn fd_matmul_and_elementwise() {
    let mut r = rng::seeded(10);
    let params = vec![rng::gaussian_matrix(3, 4, &mut r), rng::gaussian_matrix(4, 2, &mut r)];
    let c = rng::gaussian_matrix(3, 2, &mut r);
    assert_fd(&params, |t, v| {
        let p = t.matmul(v[0], v[1])?;
        let k = t.constant(c.clone());
        let q = t.mul(p, k)?;
        let q = t.sub(q, p)?;
        let s = t.sigmoid(q)?;
        let rl = t.relu(q)?;
        let s = t.add(s, rl)?;
        let s = t.scale(s, 0.7)?;
        t.sum(s)
    });
}

#[test]
fn fd_spmm_gather_center_transpose() {
    let mut r = rng::seeded(12);
    let s = Arc::new(SparseCsr::from_triplets(4, 4, vec![(0, 1, 0.5), (1, 0, 0.5), (2, 3, -1.5), (3, 3, 2.0), (1, 2, 0.25)]).unwrap());
    let params = vec![rng::gaussian_matrix(4, 3, &mut r)];
    let weight = rng::gaussian_matrix(3, 4, &mut r);
    assert_fd(&params, |t, v| {
        let p = t.spmm(&s, v[0])?;
        let p = t.gather_rows(p, &[3, 1, 1, 0])?;
        let p = t.center_cols(p)?;
        let tr = t.transpose(p)?;
        let k = t.constant(weight.clone());
        let q = t.mul(tr, k)?;
        let q = t.mul(q, q)?;
        t.mean(q)
    });
}

#[test]
fn fd_rows_and_scalars() {
    let mut r = rng::seeded(13);
    let params = vec![
        rng::gaussian_matrix(5, 3, &mut r),
        rng::gaussian_matrix(1, 3, &mut r),
        rng::gaussian_matrix(1, 3, &mut r),
        rng::gaussian_matrix(5, 3, &mut r),
    ];
    let c = rng::gaussian_matrix(5, 3, &mut r);
    assert_fd(&params, |t, v| {
        let x = t.add_row(v[0], v[1])?;
        let x = t.mul_row(x, v[2])?;
        let x = t.affine_cols(x, &[0.5, -2.0, 1.5], &[1.0, 0.0, -3.0])?;
        let x = t.shift(x, &c)?;
        let n = t.frobenius(x)?;
        let x = t.div_scalar(x, n)?;
        let d = t.row_dot(x, v[3])?;
        let l = t.log_mean_exp(d)?;
        let m = t.mean(d)?;
        t.sub(l, m)
    });
}

#[test]
fn fd_xent_pairnorm_standardize() {
    let mut r = rng::seeded(14);
    let params = vec![rng::gaussian_matrix(6, 4, &mut r)];
    let labels: Vec<_> = (0..6).map(|i| Some(i % 4)).collect();
    let w = rng::gaussian_matrix(6, 4, &mut r);
    assert_fd(&params, |t, v| {
        let x = t.pairnorm(v[0], 1.3)?;
        let (x, _, _) = t.standardize(x, 1e-5)?;
        let k = t.constant(w.clone());
        let x = t.mul(x, k)?;
        t.softmax_cross_entropy(x, &labels, &[0, 1, 3, 5])
    });
}

#[test]
fn fd_dropout_with_fixed_mask() {
    let mut r = rng::seeded(15);
    let params = vec![rng::gaussian_matrix(4, 4, &mut r)];
    assert_fd(&params, |t, v| {
        let mut mask_rng = rng::seeded(99);
        let x = t.dropout(v[0], 0.5, &mut mask_rng, true)?;
        let x = t.mul(x, x)?;
        t.sum(x)
    });
}

#[test]
fn forward_backward_is_bitwise_reproducible() {
    let run = || {
        let mut r = rng::seeded(21);
        let mut t = Tape::new();
        let w = t.param(rng::gaussian_matrix(8, 5, &mut r));
        let x = t.dropout(w, 0.3, &mut r, true).unwrap();
        let x = t.pairnorm(x, 1.0).unwrap();
        let s = t.sum(x).unwrap();
        let s2 = t.frobenius(x).unwrap();
        let l = t.add(s, s2).unwrap();
        (t.value(l).clone(), t.backward(l).unwrap().get(w))
    };
    let (a, ga) = run();
    let (b, gb) = run();
    assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
    assert!(ga.data().iter().zip(gb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}
