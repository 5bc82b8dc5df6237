use cocontact::linalg::{min_norm_solve, nullspace, rank_above, singular_values, threshold, to_matrix, FullSvd};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// A `rows × cols` matrix of rank at most `k`, as a product of random factors.
fn low_rank() -> impl Strategy<Value = (DMatrix<f64>, usize)> {
    (1usize..9, 1usize..9, 1usize..5).prop_flat_map(|(rows, cols, k)| {
        let k = k.min(rows).min(cols);
        (
            proptest::collection::vec(-2.0..2.0f64, rows * k),
            proptest::collection::vec(-2.0..2.0f64, k * cols),
        )
            .prop_map(move |(b, c)| {
                let b = DMatrix::from_vec(rows, k, b);
                let c = DMatrix::from_vec(k, cols, c);
                (b * c, k)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn kernels_and_solves((m, k) in low_rank(), x0 in proptest::collection::vec(-3.0..3.0f64, 8)) {
        let thr = threshold(&m, 1e-9);
        let rank = rank_above(&m, thr);
        prop_assert!(rank <= k);
        let sv = singular_values(&m);
        prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
        let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
        let ns = nullspace(&m, thr);
        prop_assert_eq!(ns.len(), m.ncols() - rank);
        for u in &ns {
            let mu = &m * DVector::from_vec(u.clone());
            prop_assert!(mu.amax() <= 1e-10 * scale);
        }
        let x0 = DVector::from_vec(x0[..m.ncols()].to_vec());
        let b: Vec<f64> = (&m * &x0).iter().copied().collect();
        let x = min_norm_solve(&m, &b, thr);
        let r = &m * DVector::from_vec(x.clone()) - DVector::from_vec(b.clone());
        prop_assert!(r.amax() <= 1e-10 * scale * x0.amax().max(1.0));
        prop_assert!(DVector::from_vec(x.clone()).norm() <= x0.norm() * (1.0 + 1e-10) + 1e-12);
        let full = FullSvd::new(&m);
        let y = full.solve(&b, rank);
        prop_assert!(y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-12 * scale));
    }
}

#[test]
fn identity_has_full_rank() {
    let m = to_matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2);
    assert_eq!(singular_values(&m), vec![1.0, 1.0]);
    assert!(nullspace(&m, 1e-12).is_empty());
}
