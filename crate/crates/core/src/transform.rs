//! Hypercube-Givens transforms in floating point.
//!
//! A model is `R` rounds of `log2(N)` parallel-Givens passes. Pass `p` rotates
//! every pair of coordinates whose indices differ only in bit `p`, so the index
//! schedule is implied by `N` and never stored. An optional gather permutation
//! follows the last pass.
//!
//! Butterfly convention (matches the Givens matrix with `+sin` at `(m, n)`):
//!
//! ```text
//! y_m =  cos(θ)·x_m + sin(θ)·x_n
//! y_n = -sin(θ)·x_m + cos(θ)·x_n
//! ```

use crate::error::{bail_arg, Error, Result};
use crate::matrix::Matrix;

/// Largest supported `log2(N)`; permutation indices are stored as `u16`.
pub const MAX_LOG2_N: u32 = 16;

/// A single plane rotation of coordinates `m < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation {
    m: usize,
    n: usize,
    theta: f64,
}

impl GivensRotation {
    /// Builds a rotation, storing it with `m < n`. Passing the indices in the
    /// other order describes the same matrix as the swapped pair with `-theta`.
    pub fn new(m: usize, n: usize, theta: f64) -> Result<Self> {
        match m.cmp(&n) {
            std::cmp::Ordering::Less => Ok(Self { m, n, theta }),
            std::cmp::Ordering::Greater => Ok(Self { m: n, n: m, theta: -theta }),
            std::cmp::Ordering::Equal => bail_arg!("rotation needs two distinct indices, got {m} twice"),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// The two index vectors of one parallel-Givens pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassIndexing {
    m: Vec<usize>,
    n: Vec<usize>,
}

impl PassIndexing {
    /// Validates that the pairs are ordered (`m_k < n_k`) and cover `0..2·len` exactly once.
    pub fn new(m: Vec<usize>, n: Vec<usize>) -> Result<Self> {
        if m.len() != n.len() {
            return Err(Error::Invariant(format!(
                "index vectors differ in length ({} vs {})",
                m.len(),
                n.len()
            )));
        }
        let dim = 2 * m.len();
        let mut seen = vec![false; dim];
        for (&a, &b) in m.iter().zip(&n) {
            if a >= b {
                return Err(Error::Invariant(format!("pair ({a}, {b}) is not ordered")));
            }
            for idx in [a, b] {
                if idx >= dim || std::mem::replace(&mut seen[idx], true) {
                    return Err(Error::Invariant(format!(
                        "index {idx} is out of range or repeated in a {dim}-point pass"
                    )));
                }
            }
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    /// Vector dimension `N` covered by this pass.
    pub fn dim(&self) -> usize {
        2 * self.m.len()
    }

    pub fn pairs(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.m.iter().copied().zip(self.n.iter().copied())
    }
}

/// Index pair of butterfly `j` in a pass with stride `k = 2^pass`.
#[inline]
pub(crate) fn hypercube_pair(j: usize, k: usize) -> (usize, usize) {
    let m = j + (j & k.wrapping_neg());
    (m, m + k)
}

pub(crate) fn pass_pairs(log2_n: u32, pass: u32) -> impl ExactSizeIterator<Item = (usize, usize)> {
    let k = 1usize << pass;
    (0..1usize << (log2_n - 1)).map(move |j| hypercube_pair(j, k))
}

fn check_log2_n(log2_n: u32) -> Result<()> {
    if !(1..=MAX_LOG2_N).contains(&log2_n) {
        bail_arg!("log2_n must be in 1..={MAX_LOG2_N}, got {log2_n}");
    }
    Ok(())
}

/// Pairs for pass `pass` of an `N = 2^log2_n` hypercube schedule.
pub fn hypercube_indices(log2_n: u32, pass: u32) -> Result<PassIndexing> {
    check_log2_n(log2_n)?;
    if pass >= log2_n {
        bail_arg!("pass must be below log2_n = {log2_n}, got {pass}");
    }
    let (m, n) = pass_pairs(log2_n, pass).unzip();
    Ok(PassIndexing { m, n })
}

/// Number of angles in a model: `R · N · log2(N) / 2`.
pub fn num_parameters(log2_n: u32, rounds: usize) -> usize {
    rounds * (1usize << (log2_n - 1)) * log2_n as usize
}

#[inline]
pub(crate) fn rotate(x: &mut [f64], m: usize, n: usize, c: f64, s: f64) {
    let (a, b) = (x[m], x[n]);
    x[m] = c * a + s * b;
    x[n] = -s * a + c * b;
}

/// Applies one butterfly in place.
pub fn apply_butterfly(x: &mut [f64], rot: &GivensRotation) -> Result<()> {
    if rot.n >= x.len() {
        bail_arg!("rotation index {} out of range for length {}", rot.n, x.len());
    }
    let (s, c) = rot.theta.sin_cos();
    rotate(x, rot.m, rot.n, c, s);
    Ok(())
}

/// Applies a full parallel-Givens pass in place. Pairs are disjoint, so the
/// order of the butterflies does not change the result.
pub fn apply_pass(x: &mut [f64], indexing: &PassIndexing, thetas: &[f64]) -> Result<()> {
    if thetas.len() != indexing.m.len() {
        bail_arg!("pass has {} butterflies but {} angles", indexing.m.len(), thetas.len());
    }
    if x.len() != indexing.dim() {
        bail_arg!("pass covers {} coordinates but vector has {}", indexing.dim(), x.len());
    }
    for ((m, n), &theta) in indexing.pairs().zip(thetas) {
        let (s, c) = theta.sin_cos();
        rotate(x, m, n, c, s);
    }
    Ok(())
}

/// Parameters of a Hypercube-Givens transform.
///
/// Angles are stored in application order: round-major, then pass, then
/// butterfly index `j` as produced by [`hypercube_indices`].
#[derive(Debug, Clone, PartialEq)]
pub struct HyGTModel {
    log2_n: u32,
    rounds: usize,
    angles: Vec<f64>,
    permutation: Option<Vec<usize>>,
}

pub(crate) fn check_permutation(perm: &[usize], dim: usize) -> Result<()> {
    if perm.len() != dim {
        return Err(Error::Invariant(format!(
            "permutation has length {} but dimension is {dim}",
            perm.len()
        )));
    }
    let mut seen = vec![false; dim];
    for &p in perm {
        if p >= dim || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Invariant(format!("permutation is not a bijection (index {p})")));
        }
    }
    Ok(())
}

impl HyGTModel {
    pub fn new(log2_n: u32, rounds: usize, angles: Vec<f64>, permutation: Option<Vec<usize>>) -> Result<Self> {
        check_log2_n(log2_n)?;
        if rounds == 0 {
            bail_arg!("a model needs at least one round");
        }
        let expected = num_parameters(log2_n, rounds);
        if angles.len() != expected {
            bail_arg!("expected {expected} angles for log2_n={log2_n}, R={rounds}; got {}", angles.len());
        }
        if let Some(perm) = &permutation {
            check_permutation(perm, 1 << log2_n)?;
        }
        Ok(Self { log2_n, rounds, angles, permutation })
    }

    /// All angles zero, no permutation: the identity transform.
    pub fn identity(log2_n: u32, rounds: usize) -> Result<Self> {
        check_log2_n(log2_n)?;
        Self::new(log2_n, rounds, vec![0.0; num_parameters(log2_n, rounds)], None)
    }

    pub fn log2_n(&self) -> u32 {
        self.log2_n
    }

    /// Vector dimension `N`.
    pub fn dim(&self) -> usize {
        1 << self.log2_n
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Total number of passes, `R · log2(N)`.
    pub fn pass_count(&self) -> usize {
        self.rounds * self.log2_n as usize
    }

    pub fn butterflies_per_pass(&self) -> usize {
        self.dim() / 2
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub(crate) fn angles_mut(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    /// Angles of pass `global_pass` (counting across rounds).
    pub fn pass_angles(&self, global_pass: usize) -> &[f64] {
        let h = self.butterflies_per_pass();
        &self.angles[global_pass * h..(global_pass + 1) * h]
    }

    /// Hypercube dimension used by a global pass index.
    pub fn pass_bit(&self, global_pass: usize) -> u32 {
        (global_pass % self.log2_n as usize) as u32
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.permutation.as_deref()
    }

    /// Returns the same model with a gather permutation attached (`out[i] = in[perm[i]]`).
    pub fn with_permutation(mut self, perm: Vec<usize>) -> Result<Self> {
        check_permutation(&perm, self.dim())?;
        self.permutation = Some(perm);
        Ok(self)
    }

    pub fn without_permutation(mut self) -> Self {
        self.permutation = None;
        self
    }

    /// Appends `extra` zero-angle rounds after the existing ones. The permutation is dropped
    /// since it was chosen for the shorter model.
    pub fn extend_rounds(&self, extra: usize) -> HyGTModel {
        let mut angles = self.angles.clone();
        angles.resize(num_parameters(self.log2_n, self.rounds + extra), 0.0);
        HyGTModel { log2_n: self.log2_n, rounds: self.rounds + extra, angles, permutation: None }
    }

    pub(crate) fn apply_global_pass(&self, x: &mut [f64], global_pass: usize, inverse: bool) {
        let k = 1usize << self.pass_bit(global_pass);
        for (j, &theta) in self.pass_angles(global_pass).iter().enumerate() {
            let (m, n) = hypercube_pair(j, k);
            let (s, c) = theta.sin_cos();
            rotate(x, m, n, c, if inverse { -s } else { s });
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            bail_arg!("model dimension is {} but vector has length {len}", self.dim());
        }
        Ok(())
    }

    /// Forward transform in place.
    pub fn forward_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        for p in 0..self.pass_count() {
            self.apply_global_pass(x, p, false);
        }
        if let Some(perm) = &self.permutation {
            let pre = x.to_vec();
            for (out, &src) in x.iter_mut().zip(perm) {
                *out = pre[src];
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        self.forward_in_place(&mut y)?;
        Ok(y)
    }

    /// Inverse transform in place: undo the permutation, then run every pass
    /// in reverse order with negated angles.
    pub fn inverse_in_place(&self, y: &mut [f64]) -> Result<()> {
        self.check_len(y.len())?;
        if let Some(perm) = &self.permutation {
            let post = y.to_vec();
            for (&dst, &v) in perm.iter().zip(&post) {
                y[dst] = v;
            }
        }
        for p in (0..self.pass_count()).rev() {
            self.apply_global_pass(y, p, true);
        }
        Ok(())
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = y.to_vec();
        self.inverse_in_place(&mut x)?;
        Ok(x)
    }

    /// Materializes the transform; column `j` is `forward(e_j)`.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.dim();
        // Rows of Tᵀ are forward(e_j); transpose at the end.
        let mut cols = Matrix::identity(n);
        for j in 0..n {
            self.forward_in_place(cols.row_mut(j)).expect("row length equals model dimension");
        }
        cols.transpose()
    }
}
