//! Residual correlation, the KLT reference and coding-gain evaluation.
//!
//! Coding gain is the high-rate figure of merit: the ratio of the arithmetic
//! to the geometric mean of the transformed variances, in dB. Under equal bit
//! allocation the distribution constant of the rate model cancels, so the
//! gain does not depend on whether the coefficients are modelled as Gaussian
//! or Laplacian; only absolute rate estimates would, and none are produced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Block, ResidualDataset};
use crate::error::{bail_arg, Error, Result};
use crate::matrix::Matrix;

/// Symmetric correlation matrix `Φ = E[r·rᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    values: Matrix,
    sample_count: u64,
}

impl CorrelationMatrix {
    /// Wraps an analytic covariance. The input is symmetrized by averaging with
    /// its transpose so the stored matrix is exactly symmetric.
    pub fn from_matrix(m: Matrix) -> Self {
        let n = m.dim();
        let values = Matrix::from_fn(n, |i, j| if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) });
        Self { values, sample_count: 0 }
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    /// Number of vectors the estimate was accumulated from; 0 for analytic models.
    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    pub fn diagonal(&self) -> VarianceVector {
        VarianceVector(self.values.diagonal())
    }

    pub(crate) fn from_symmetric_unchecked(values: Matrix, sample_count: u64) -> Self {
        Self { values, sample_count }
    }
}

/// Running sum of outer products. Shards can be accumulated independently and
/// combined with [`CorrelationAccumulator::merge`].
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    dim: usize,
    sum: Vec<f64>,
    count: u64,
}

impl CorrelationAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { dim, sum: vec![0.0; dim * dim], count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, r: &[f64]) -> Result<()> {
        if r.len() != self.dim {
            bail_arg!("residual has length {} but accumulator dimension is {}", r.len(), self.dim);
        }
        let n = self.dim;
        for i in 0..n {
            let ri = r[i];
            let row = &mut self.sum[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += ri * r[j];
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Adds another shard's sums. Equivalent to pushing its vectors here.
    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<()> {
        if other.dim != self.dim {
            bail_arg!("cannot merge accumulators of dimension {} and {}", self.dim, other.dim);
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finish(&self) -> Result<CorrelationMatrix> {
        if self.count == 0 {
            bail_arg!("no residual vectors were accumulated");
        }
        let n = self.dim;
        let scale = 1.0 / self.count as f64;
        let values = Matrix::from_fn(n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            self.sum[a * n + b] * scale
        });
        Ok(CorrelationMatrix::from_symmetric_unchecked(values, self.count))
    }
}

/// `Φ = (1/M)·Σ r·rᵀ` over all vectors.
pub fn accumulate_correlation<I>(residuals: I) -> Result<CorrelationMatrix>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    let mut iter = residuals.into_iter().peekable();
    let Some(first) = iter.peek() else {
        bail_arg!("cannot estimate a correlation from an empty set");
    };
    let mut acc = CorrelationAccumulator::new(first.as_ref().len());
    for r in iter {
        acc.push(r.as_ref())?;
    }
    acc.finish()
}

/// Transformed-coefficient variances `σ²_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceVector(pub Vec<f64>);

impl VarianceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Eigen-decomposition of a correlation matrix: the KLT.
#[derive(Debug, Clone, PartialEq)]
pub struct KLTResult {
    /// Rows are eigenvectors, ordered by descending eigenvalue.
    pub basis: Matrix,
    pub eigenvalues: Vec<f64>,
    pub sweeps: usize,
}

impl KLTResult {
    /// `y = K·r`.
    pub fn forward(&self, r: &[f64]) -> Result<Vec<f64>> {
        klt_forward(self, r)
    }

    pub fn gain_db(&self) -> f64 {
        coding_gain_db(&VarianceVector(self.eigenvalues.clone()))
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_TOLERANCE: f64 = 1e-12;

/// Cyclic Jacobi eigen-decomposition.
///
/// Each rotation uses the same butterfly convention as the transform module
/// (`y_p = c·x_p + s·x_q`), with the small-angle root so `|θ| ≤ π/4`. Sweeps
/// stop once the largest off-diagonal entry falls below `1e-12·|trace|`.
pub fn jacobi_eigen(phi: &CorrelationMatrix) -> Result<KLTResult> {
    let n = phi.dim();
    let mut a = phi.matrix().clone();
    let mut k = Matrix::identity(n);

    let trace = a.trace().abs();
    let scale = if trace > 0.0 {
        trace
    } else {
        a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let threshold = JACOBI_TOLERANCE * scale;

    let mut sweeps = 0;
    loop {
        let off = a.max_off_diagonal();
        if off <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (max off-diagonal {off:e}, target {threshold:e})"
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(p, p)] - a[(q, q)]) / (2.0 * apq);
                let t = if tau.abs() > 1e150 {
                    0.5 / tau
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let (aip, aiq) = (a[(i, p)], a[(i, q)]);
                    let np = c * aip + s * aiq;
                    let nq = -s * aip + c * aiq;
                    a[(i, p)] = np;
                    a[(p, i)] = np;
                    a[(i, q)] = nq;
                    a[(q, i)] = nq;
                }
                a[(p, p)] += t * apq;
                a[(q, q)] -= t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for j in 0..n {
                    let (kp, kq) = (k[(p, j)], k[(q, j)]);
                    k[(p, j)] = c * kp + s * kq;
                    k[(q, j)] = -s * kp + c * kq;
                }
            }
        }
        sweeps += 1;
    }

    let diag = a.diagonal();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));

    let mut basis = Matrix::zeros(n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (row, &src) in order.iter().enumerate() {
        eigenvalues.push(diag[src]);
        let v = k.row(src);
        // Sign: the largest-magnitude entry (first on ties) is made non-negative.
        let mut lead = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = j;
            }
        }
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for (dst, &x) in basis.row_mut(row).iter_mut().zip(v) {
            *dst = sign * x;
        }
    }
    Ok(KLTResult { basis, eigenvalues, sweeps })
}

pub fn klt_forward(klt: &KLTResult, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != klt.basis.dim() {
        bail_arg!("KLT dimension is {} but vector has length {}", klt.basis.dim(), r.len());
    }
    Ok(klt.basis.mul_vec(r))
}

/// `v_i = (T·Φ·Tᵀ)_ii`, one quadratic form per row of `T`.
pub fn transformed_variances(transform: &Matrix, phi: &CorrelationMatrix) -> Result<VarianceVector> {
    let n = phi.dim();
    if transform.dim() != n {
        bail_arg!("transform is {}x{} but correlation is {n}x{n}", transform.dim(), transform.dim());
    }
    let mut tmp = vec![0.0; n];
    let v = (0..n)
        .map(|i| {
            let t = transform.row(i);
            for (j, slot) in tmp.iter_mut().enumerate() {
                *slot = phi.matrix().row(j).iter().zip(t).map(|(a, b)| a * b).sum();
            }
            t.iter().zip(&tmp).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok(VarianceVector(v))
}

/// Variances at or below `GAIN_FLOOR · mean` are clamped before taking logs.
pub const GAIN_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingGain {
    pub db: f64,
    /// How many variances were clamped to the floor. Non-zero means the source
    /// is singular or close to it.
    pub clamped: usize,
}

impl CodingGain {
    pub fn is_degenerate(&self) -> bool {
        self.clamped > 0
    }
}

pub fn coding_gain(v: &VarianceVector) -> CodingGain {
    let n = v.0.len();
    if n == 0 {
        return CodingGain { db: 0.0, clamped: 0 };
    }
    let mean = v.sum() / n as f64;
    if mean.is_nan() || mean <= 0.0 {
        return CodingGain { db: 0.0, clamped: n };
    }
    let floor = GAIN_FLOOR * mean;
    let mut clamped = 0;
    let mean_log = v
        .0
        .iter()
        .map(|&x| {
            if x <= floor {
                clamped += 1;
                floor.ln()
            } else {
                x.ln()
            }
        })
        .sum::<f64>()
        / n as f64;
    let db = 10.0 * (mean.ln() - mean_log) / std::f64::consts::LN_10;
    CodingGain { db, clamped }
}

/// `10·log10(arithmetic mean / geometric mean)` of the variances.
pub fn coding_gain_db(v: &VarianceVector) -> f64 {
    coding_gain(v).db
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        bail_arg!("correlation coefficient must be in [0, 1), got {rho}");
    }
    Ok(())
}

/// 1-D first-order Markov covariance, `A_ij = ρ^|i−j|`.
pub fn ar1_covariance(n: usize, rho: f64) -> Result<CorrelationMatrix> {
    check_rho(rho)?;
    if n == 0 {
        bail_arg!("dimension must be positive");
    }
    let m = Matrix::from_fn(n, |i, j| rho.powi(i.abs_diff(j) as i32));
    Ok(CorrelationMatrix::from_symmetric_unchecked(m, 0))
}

/// Separable 2-D AR(1) covariance `A ⊗ A` over raster-ordered pixels of a
/// `block_size × block_size` block.
pub fn ar1_covariance_2d(block_size: usize, rho: f64) -> Result<CorrelationMatrix> {
    check_rho(rho)?;
    if !block_size.is_power_of_two() {
        bail_arg!("block size must be a power of two, got {block_size}");
    }
    let b = block_size;
    let m = Matrix::from_fn(b * b, |i, j| {
        let (ri, ci) = (i / b, i % b);
        let (rj, cj) = (j / b, j % b);
        rho.powi(ri.abs_diff(rj) as i32) * rho.powi(ci.abs_diff(cj) as i32)
    });
    Ok(CorrelationMatrix::from_symmetric_unchecked(m, 0))
}

/// Draws Gaussian vectors with a prescribed covariance by coloring white
/// noise: `r = Kᵀ·√Λ·z`.
#[derive(Debug, Clone)]
pub struct ResidualSampler {
    coloring: Matrix,
}

impl ResidualSampler {
    pub fn new(phi: &CorrelationMatrix) -> Result<Self> {
        let klt = jacobi_eigen(phi)?;
        let n = phi.dim();
        let tol = 1e-10 * phi.trace().abs();
        if let Some(&min) = klt.eigenvalues.last() {
            if min < -tol {
                bail_arg!("covariance is not positive semi-definite (eigenvalue {min:e})");
            }
        }
        let roots: Vec<f64> = klt.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        let coloring = Matrix::from_fn(n, |i, j| klt.basis[(j, i)] * roots[j]);
        Ok(Self { coloring })
    }

    pub fn dim(&self) -> usize {
        self.coloring.dim()
    }

    /// `count` vectors labelled `class_id`, from ChaCha8 stream `stream` of `seed`.
    pub fn sample(&self, count: usize, seed: u64, stream: u64, class_id: usize) -> Vec<Block> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let n = self.dim();
        let mut z = vec![0.0; n];
        (0..count)
            .map(|_| {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                Block { class_id, values: self.coloring.mul_vec(&z) }
            })
            .collect()
    }
}

/// Single-class synthetic dataset with covariance `phi`. Deterministic in `seed`.
pub fn sample_residuals(phi: &CorrelationMatrix, count: usize, seed: u64) -> Result<ResidualDataset> {
    if count == 0 {
        bail_arg!("sample count must be positive");
    }
    let sampler = ResidualSampler::new(phi)?;
    ResidualDataset::new(phi.dim(), 1, sampler.sample(count, seed, 0, 0))
}
