#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use hygt_core::{HyGTModel, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line C-style index generator, in 32-bit
/// signed arithmetic.
pub fn reference_hypercube(log2_n: i32) -> (Vec<Vec<i32>>, Vec<Vec<i32>>) {
    let mut m = vec![vec![0i32; 1 << (log2_n - 1)]; log2_n as usize];
    let mut n = m.clone();
    for i in 0..log2_n {
        let h_n = 1i32 << (log2_n - 1);
        let k = 1i32 << i;
        for j in 0..h_n {
            m[i as usize][j as usize] = j + (j & -k);
            n[i as usize][j as usize] = m[i as usize][j as usize] + k;
        }
    }
    (m, n)
}

/// Dense Givens matrix from the textbook definition.
pub fn givens_matrix(dim: usize, m: usize, n: usize, theta: f64) -> Matrix {
    Matrix::from_fn(dim, |i, j| {
        if (i == m && j == m) || (i == n && j == n) {
            theta.cos()
        } else if i == m && j == n {
            theta.sin()
        } else if i == n && j == m {
            -theta.sin()
        } else if i == j {
            1.0
        } else {
            0.0
        }
    })
}

/// `P · G_L ··· G_1` built from dense Givens factors and the reference schedule.
pub fn oracle_matrix(model: &HyGTModel) -> Matrix {
    let dim = model.dim();
    let log2_n = model.log2_n() as i32;
    let (ms, ns) = reference_hypercube(log2_n);
    let mut t = Matrix::identity(dim);
    for p in 0..model.pass_count() {
        let bit = p % log2_n as usize;
        let angles = model.pass_angles(p);
        let mut pass = Matrix::identity(dim);
        for j in 0..dim / 2 {
            let g = givens_matrix(dim, ms[bit][j] as usize, ns[bit][j] as usize, angles[j]);
            pass = g.mul(&pass);
        }
        t = pass.mul(&t);
    }
    if let Some(perm) = model.permutation() {
        let p = Matrix::from_fn(dim, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
        t = p.mul(&t);
    }
    t
}

pub fn random_model(log2_n: u32, rounds: usize, seed: u64) -> HyGTModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = hygt_core::num_parameters(log2_n, rounds);
    let angles = (0..count).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
    HyGTModel::new(log2_n, rounds, angles, None).unwrap()
}

pub fn random_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random PSD matrix `B·Bᵀ / dim`.
pub fn random_psd(dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Matrix::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let p = b.mul(&b.transpose());
    Matrix::from_fn(dim, |i, j| p[(i, j)] / dim as f64)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
