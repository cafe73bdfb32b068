//! Deterministic 64-bit numerical kernels: dense and CSR matrices,
//! activations, dropout, Gaussian sampling, backward rules and Adam.

mod adam;
mod dense;
mod ops;
mod rng;
mod sparse;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{dot, matmul_backward, DenseMatrix};
pub use ops::{
    dropout, dropout_mask, log_sigmoid, relu, relu_backward, relu_scalar, sample_standard_normal,
    sigmoid, sigmoid_backward, sigmoid_scalar,
};
pub use rng::Rng;
pub use sparse::SparseCsr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("keep probability must lie in (0, 1], got {0}")]
    InvalidKeepProb(f64),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(&'static str),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_range(-1.0, 1.0))
    }

    fn sparse_random(rows: usize, cols: usize, density: f64, rng: &mut Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| {
            if rng.uniform() < density {
                rng.uniform_range(-2.0, 2.0)
            } else {
                0.0
            }
        })
    }

    /// Central differences of `f` around `x`, one entry at a time.
    fn numeric_grad(x: &DenseMatrix, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
        let h = 1e-5;
        let mut g = DenseMatrix::zeros(x.rows(), x.cols());
        for k in 0..x.data().len() {
            let mut plus = x.clone();
            plus.data_mut()[k] += h;
            let mut minus = x.clone();
            minus.data_mut()[k] -= h;
            g.data_mut()[k] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        g
    }

    fn assert_grad_close(analytic: &DenseMatrix, numeric: &DenseMatrix) {
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            assert!(rel < 1e-4, "analytic {a} vs numeric {n}");
        }
    }

    /// Scalar probe `L = Σ W ⊙ Y` so `dL/dY = W`.
    fn probe(y: &DenseMatrix, w: &DenseMatrix) -> f64 {
        y.hadamard(w).unwrap().sum()
    }

    #[test]
    fn spmm_identity_and_zero() {
        let mut rng = Rng::seed_from_u64(1);
        let b = random_matrix(4, 3, &mut rng);
        assert_eq!(SparseCsr::identity(4).spmm(&b).unwrap(), b);
        let zero = SparseCsr::from_triplets(4, 4, vec![]).unwrap();
        assert_eq!(zero.spmm(&b).unwrap(), DenseMatrix::zeros(4, 3));
    }

    #[test]
    fn spmm_matches_dense_product() {
        let mut rng = Rng::seed_from_u64(7);
        let a = sparse_random(5, 5, 0.4, &mut rng);
        let b = random_matrix(5, 3, &mut rng);
        let sparse = SparseCsr::from_dense(&a);
        let got = sparse.spmm(&b).unwrap();
        // straight triple loop as the oracle
        for i in 0..5 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((got.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spmm_rejects_bad_shape() {
        let s = SparseCsr::identity(3);
        let b = DenseMatrix::zeros(4, 2);
        assert!(matches!(s.spmm(&b), Err(KernelError::ShapeMismatch { .. })));
        assert!(matches!(
            DenseMatrix::zeros(2, 3).matmul(&DenseMatrix::zeros(2, 3)),
            Err(KernelError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn csr_validation() {
        assert!(SparseCsr::try_new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseCsr::try_new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseCsr::try_new(1, 2, vec![0, 1], vec![0], vec![f64::NAN]).is_err());
        let ok = SparseCsr::try_new(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 2.0]).unwrap();
        assert_eq!(ok.get(0, 1), 2.0);
    }

    #[test]
    fn activations() {
        assert_eq!(relu_scalar(-1.0), 0.0);
        assert_eq!(relu_scalar(2.0), 2.0);
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!(sigmoid_scalar(-800.0) >= 0.0 && sigmoid_scalar(800.0) <= 1.0);
        assert!(sigmoid_scalar(-30.0) > 0.0 && sigmoid_scalar(30.0) < 1.0);
        assert!((log_sigmoid(-50.0) - (-50.0)).abs() < 1e-12);
        assert!(log_sigmoid(50.0).abs() < 1e-20);
        assert!((log_sigmoid(0.3) - sigmoid_scalar(0.3).ln()).abs() < 1e-15);
    }

    #[test]
    fn dropout_keep_one_is_identity() {
        let mut rng = Rng::seed_from_u64(3);
        let m = random_matrix(6, 4, &mut rng);
        let (out, _) = dropout(&m, 1.0, &mut rng).unwrap();
        assert_eq!(out, m);
        assert!(matches!(
            dropout(&m, 0.0, &mut rng),
            Err(KernelError::InvalidKeepProb(_))
        ));
        assert!(dropout(&m, 1.5, &mut rng).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut rng = Rng::seed_from_u64(4);
        let m = DenseMatrix::filled(50, 50, 1.0);
        let (out, mask) = dropout(&m, 0.5, &mut rng).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0 || x == 2.0));
        assert_eq!(out, mask);
        let kept = out.data().iter().filter(|&&x| x > 0.0).count() as f64 / 2500.0;
        assert!((kept - 0.5).abs() < 0.05);
    }

    #[test]
    fn standard_normal_is_deterministic_and_calibrated() {
        let a = sample_standard_normal(10, 10, &mut Rng::seed_from_u64(11));
        let b = sample_standard_normal(10, 10, &mut Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert_eq!(
            sample_standard_normal(0, 0, &mut Rng::seed_from_u64(0))
                .data()
                .len(),
            0
        );

        let draws = sample_standard_normal(1, 100_000, &mut Rng::seed_from_u64(12));
        let n = draws.data().len() as f64;
        let mean = draws.sum() / n;
        let var = draws.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = DenseMatrix::filled(2, 2, 0.3);
        let before = p.clone();
        let mut st = AdamState::new(2, 2, AdamConfig::default());
        adam_step(&mut p, &DenseMatrix::zeros(2, 2), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_step_size() {
        let cfg = AdamConfig::default();
        let g = DenseMatrix::from_rows(&[vec![0.2, -3.0]]).unwrap();
        let mut p = DenseMatrix::zeros(1, 2);
        let mut st = AdamState::new(1, 2, cfg);
        adam_step(&mut p, &g, &mut st).unwrap();
        // t = 1: m_hat = g, v_hat = g², update = lr·g/(|g| + eps)
        for (&x, &gi) in p.data().iter().zip(g.data()) {
            let expected = -cfg.step_size * gi / (gi.abs() + cfg.eps);
            assert!((x - expected).abs() < 1e-15);
            assert!((x.abs() - cfg.step_size).abs() < 1e-7);
        }
    }

    #[test]
    fn adam_rejects_nan_and_shape() {
        let mut p = DenseMatrix::zeros(1, 2);
        let mut st = AdamState::new(1, 2, AdamConfig::default());
        let bad = DenseMatrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        assert_eq!(
            adam_step(&mut p, &bad, &mut st),
            Err(KernelError::NonFiniteGradient)
        );
        assert_eq!(st.step_count(), 0);
        assert!(adam_step(&mut p, &DenseMatrix::zeros(2, 1), &mut st).is_err());
    }

    #[test]
    fn matmul_backward_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(21);
        let a = random_matrix(3, 4, &mut rng);
        let b = random_matrix(4, 2, &mut rng);
        let w = random_matrix(3, 2, &mut rng);
        let (ga, gb) = matmul_backward(&a, &b, &w).unwrap();
        assert_grad_close(
            &ga,
            &numeric_grad(&a, |x| probe(&x.matmul(&b).unwrap(), &w)),
        );
        assert_grad_close(&gb, &numeric_grad(&b, |x| probe(&a.matmul(x).unwrap(), &w)));
    }

    #[test]
    fn spmm_backward_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(22);
        let s = SparseCsr::from_dense(&sparse_random(5, 4, 0.5, &mut rng));
        let b = random_matrix(4, 3, &mut rng);
        let w = random_matrix(5, 3, &mut rng);
        let gb = s.spmm_backward(&w).unwrap();
        assert_grad_close(&gb, &numeric_grad(&b, |x| probe(&s.spmm(x).unwrap(), &w)));
    }

    #[test]
    fn relu_and_sigmoid_backward_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(23);
        // keep entries away from the ReLU kink
        let x = DenseMatrix::from_fn(4, 3, |_, _| {
            let v = rng.uniform_range(0.1, 1.0);
            if rng.uniform() < 0.5 {
                -v
            } else {
                v
            }
        });
        let w = random_matrix(4, 3, &mut rng);
        let g = relu_backward(&w, &x).unwrap();
        assert_grad_close(&g, &numeric_grad(&x, |m| probe(&relu(m), &w)));
        let s = sigmoid(&x);
        let g = sigmoid_backward(&w, &s).unwrap();
        assert_grad_close(&g, &numeric_grad(&x, |m| probe(&sigmoid(m), &w)));
    }

    #[test]
    fn dropout_backward_is_mask_product() {
        let mut rng = Rng::seed_from_u64(24);
        let x = random_matrix(4, 4, &mut rng);
        let w = random_matrix(4, 4, &mut rng);
        let mask = dropout_mask(4, 4, 0.5, &mut rng).unwrap();
        let analytic = w.hadamard(&mask).unwrap();
        let numeric = numeric_grad(&x, |m| probe(&m.hadamard(&mask).unwrap(), &w));
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            assert!((a - n).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn spmm_equals_matmul_for_any_dense(
            seed in any::<u64>(),
            rows in 1usize..8,
            inner in 1usize..8,
            cols in 1usize..6,
            density in 0.0f64..1.0,
        ) {
            let mut rng = Rng::seed_from_u64(seed);
            let d = sparse_random(rows, inner, density, &mut rng);
            let b = random_matrix(inner, cols, &mut rng);
            let via_sparse = SparseCsr::from_dense(&d).spmm(&b).unwrap();
            let via_dense = d.matmul(&b).unwrap();
            for (x, y) in via_sparse.data().iter().zip(via_dense.data()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert_eq!(SparseCsr::from_dense(&d).to_dense(), d);
        }

        #[test]
        fn sigmoid_strictly_inside_unit_interval(x in -30.0f64..30.0) {
            let s = sigmoid_scalar(x);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!(relu_scalar(x) >= 0.0);
        }
    }
}
