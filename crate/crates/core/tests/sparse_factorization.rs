use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sli::sparse_linalg::{factorize_with, FactorKind, FactorOptions, FillOrdering};
use sli::{factorize, CsrMatrix, SparseSymMatrix};

/// Dense `B^T B + I` with a random sparsity mask on `B`.
fn random_spd(n: usize, seed: u64, density: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, n, |_, _| if rng.random::<f64>() < density { rng.random::<f64>() * 2.0 - 1.0 } else { 0.0 });
    b.transpose() * &b + DMatrix::identity(n, n)
}

fn to_sparse(a: &DMatrix<f64>) -> SparseSymMatrix {
    let n = a.nrows();
    let data: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
    SparseSymMatrix::new(CsrMatrix::from_dense(n, n, &data).unwrap()).unwrap()
}

#[test]
fn log_determinant_matches_eigenvalues() {
    for seed in 0..5 {
        let a = random_spd(40, seed, 0.1);
        let expected: f64 = a.clone().symmetric_eigen().eigenvalues.iter().map(|l| l.ln()).sum();
        let got = factorize(&to_sparse(&a)).unwrap().log_determinant().unwrap();
        assert!((got - expected).abs() <= 1e-8 * expected.abs(), "{got} vs {expected}");
    }
}

#[test]
fn solve_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..5 {
        let a = random_spd(40, 10 + seed, 0.15);
        let b: Vec<f64> = (0..40).map(|_| rng.random::<f64>() - 0.5).collect();
        let expected = a.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        let got = factorize(&to_sparse(&a)).unwrap().solve(&b).unwrap();
        for (x, y) in got.iter().zip(expected.iter()) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}

#[test]
fn multiple_right_hand_sides() {
    let a = random_spd(20, 3, 0.2);
    let f = factorize(&to_sparse(&a)).unwrap();
    let rhs = vec![vec![1.0; 20], (0..20).map(|i| i as f64).collect::<Vec<_>>()];
    let many = f.solve_many(&rhs).unwrap();
    for (x, b) in many.iter().zip(&rhs) {
        assert_eq!(x, &f.solve(b).unwrap());
    }
}

#[test]
fn log_determinant_independent_of_ordering() {
    let a = to_sparse(&random_spd(40, 21, 0.1));
    let amd = factorize(&a).unwrap().log_determinant().unwrap();
    let natural = factorize_with(&a, &FactorOptions { kind: FactorKind::Cholesky, ordering: FillOrdering::Natural })
        .unwrap()
        .log_determinant()
        .unwrap();
    let reversed = factorize_with(&a, &FactorOptions { kind: FactorKind::Cholesky, ordering: FillOrdering::Custom((0..40).rev().collect()) })
        .unwrap()
        .log_determinant()
        .unwrap();
    assert!((amd - natural).abs() <= 1e-10 * amd.abs());
    assert!((amd - reversed).abs() <= 1e-10 * amd.abs());
}

#[test]
fn lu_agrees_with_cholesky_on_spd() {
    let a = to_sparse(&random_spd(30, 8, 0.2));
    let c = factorize(&a).unwrap();
    let l = factorize_with(&a, &FactorOptions { kind: FactorKind::Lu, ..Default::default() }).unwrap();
    assert!((c.log_determinant().unwrap() - l.log_determinant().unwrap()).abs() < 1e-10);
    let b = vec![1.0; 30];
    for (x, y) in c.solve(&b).unwrap().iter().zip(l.solve(&b).unwrap()) {
        assert!((x - y).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn round_trip_residual_is_small(seed in 0u64..1000, n in 2usize..40, density in 0.05f64..0.5) {
        let dense = random_spd(n, seed, density);
        let a = to_sparse(&dense);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let b = a.mul_vec(&x_true).unwrap();
        let x = factorize(&a).unwrap().solve(&b).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        let res = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let norm_a = dense.amax();
        let norm_x = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let norm_b = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(res / (norm_a * norm_x + norm_b) <= 1e-10);
    }
}
