mod common;

use common::*;
use hygt_core::{apply_butterfly, apply_pass, hypercube_indices, GivensRotation, HyGTModel, Matrix, PassIndexing};
use proptest::prelude::*;

#[test]
fn schedule_matches_reference_code() {
    for log2_n in 1..=10u32 {
        let (ms, ns) = reference_hypercube(log2_n as i32);
        for pass in 0..log2_n {
            let idx = hypercube_indices(log2_n, pass).unwrap();
            let m: Vec<usize> = ms[pass as usize].iter().map(|&v| v as usize).collect();
            let n: Vec<usize> = ns[pass as usize].iter().map(|&v| v as usize).collect();
            assert_eq!(idx.m(), &m[..], "log2_n={log2_n} pass={pass}");
            assert_eq!(idx.n(), &n[..], "log2_n={log2_n} pass={pass}");
            // The constructor re-validates the cover invariant.
            PassIndexing::new(m, n).unwrap();
        }
    }
}

#[test]
fn single_pass_matches_matrix_oracle() {
    for seed in 0..10 {
        let x = random_vector(8, seed);
        let thetas = random_vector(4, seed + 100);
        for pass in 0..3 {
            let idx = hypercube_indices(3, pass).unwrap();
            let mut y = x.clone();
            apply_pass(&mut y, &idx, &thetas).unwrap();
            let mut g = Matrix::identity(8);
            for ((m, n), &t) in idx.m().iter().zip(idx.n()).zip(&thetas) {
                g = givens_matrix(8, *m, *n, t).mul(&g);
            }
            assert!(max_abs_diff(&y, &g.mul_vec(&x)) < 1e-12);
        }
    }
}

#[test]
fn sixteen_point_forward_matches_oracle() {
    for seed in 0..5 {
        let model = random_model(4, 3, seed);
        let x = random_vector(16, seed + 7);
        let expected = oracle_matrix(&model).mul_vec(&x);
        assert!(max_abs_diff(&model.forward(&x).unwrap(), &expected) < 1e-12);
        assert!(model.to_matrix().max_abs_diff(&oracle_matrix(&model)) < 1e-12);
    }
}

#[test]
fn permuted_model_matches_oracle() {
    let model = random_model(3, 2, 9).with_permutation(vec![5, 2, 7, 0, 1, 6, 3, 4]).unwrap();
    assert!(model.to_matrix().max_abs_diff(&oracle_matrix(&model)) < 1e-12);
    let y = random_vector(8, 1);
    let inv = model.inverse(&y).unwrap();
    assert!(max_abs_diff(&inv, &model.to_matrix().transpose().mul_vec(&y)) < 1e-12);
}

#[test]
fn reconstruction_across_sizes() {
    for (log2_n, seed) in [(1u32, 1u64), (2, 2), (4, 3), (6, 4), (8, 5)] {
        let model = random_model(log2_n, 3, seed);
        let x = random_vector(model.dim(), seed);
        let back = model.inverse(&model.forward(&x).unwrap()).unwrap();
        assert!(max_abs_diff(&back, &x) < 1e-12, "N={}", model.dim());
    }
}

#[test]
fn inverse_is_transpose_at_64() {
    let model = random_model(6, 2, 77);
    let y = random_vector(64, 78);
    let inv = model.inverse(&y).unwrap();
    assert!(max_abs_diff(&inv, &model.to_matrix().transpose().mul_vec(&y)) < 1e-12);
}

fn pass_indexing_from(pairs: &[(usize, usize)]) -> PassIndexing {
    PassIndexing::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orthogonal_and_invertible(log2_n in 1u32..=6, rounds in 1usize..=4, seed in any::<u64>()) {
        let model = random_model(log2_n, rounds, seed);
        let t = model.to_matrix();
        prop_assert!(t.orthogonality_error() < 1e-12);
        let x = random_vector(model.dim(), seed ^ 0xabcd);
        let y = model.forward(&x).unwrap();
        prop_assert!(max_abs_diff(&y, &t.mul_vec(&x)) < 1e-12);
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((nx - ny).abs() <= 1e-12 * nx.max(1.0));
        prop_assert!(max_abs_diff(&model.inverse(&y).unwrap(), &x) < 1e-12);
    }

    #[test]
    fn butterfly_order_within_pass_is_irrelevant(log2_n in 1u32..=6, pass_seed in any::<u32>(), seed in any::<u64>(), shuffle in any::<u64>()) {
        let pass = pass_seed % log2_n;
        let idx = hypercube_indices(log2_n, pass).unwrap();
        let half = idx.m().len();
        let thetas = random_vector(half, seed);
        let x = random_vector(2 * half, seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..half).collect();
        let mut state = shuffle;
        for i in (1..half).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let pairs: Vec<(usize, usize)> = order.iter().map(|&j| (idx.m()[j], idx.n()[j])).collect();
        let shuffled_thetas: Vec<f64> = order.iter().map(|&j| thetas[j]).collect();

        let mut a = x.clone();
        apply_pass(&mut a, &idx, &thetas).unwrap();
        let mut b = x.clone();
        apply_pass(&mut b, &pass_indexing_from(&pairs), &shuffled_thetas).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn butterfly_preserves_norm(a in -1e3f64..1e3, b in -1e3f64..1e3, theta in -10.0f64..10.0) {
        let mut x = [a, b];
        apply_butterfly(&mut x, &GivensRotation::new(0, 1, theta).unwrap()).unwrap();
        let before = (a * a + b * b).sqrt();
        let after = (x[0] * x[0] + x[1] * x[1]).sqrt();
        prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
    }
}

#[test]
fn zero_model_is_identity_matrix() {
    for log2_n in 1..=5 {
        assert_eq!(HyGTModel::identity(log2_n, 2).unwrap().to_matrix(), Matrix::identity(1 << log2_n));
    }
}
