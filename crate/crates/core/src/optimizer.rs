//! Training HyGT angles for maximum coding gain on a given correlation matrix.
//!
//! Each restart starts from an initial model (greedy Jacobi for restart 0,
//! uniform random angles otherwise) and runs cyclic coordinate descent over
//! every angle in application order. See [`optimize`] for how round counts
//! are chained.
//!
//! For a single butterfly `(m, n)` in pass `p`, write `C` for the covariance
//! propagated through everything before it (including the other, disjoint
//! butterflies of pass `p`) and `S` for the product of all later passes. The
//! final variances are `v_i(θ) = zᵢᵀ C zᵢ` with `zᵢ = G(θ)ᵀ Sᵢᵀ`, and only two
//! entries of `zᵢ` depend on `θ`. So once `(C·Sᵢᵀ)_m` and `(C·Sᵢᵀ)_n` are known,
//! every `v_i(θ)` costs O(1) and the exact objective `Σ ln v_i(θ)` can be
//! searched over a dense grid plus refinement. A coordinate is only moved when
//! the objective strictly improves, so the gain never decreases.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{bail_arg, Error, Result};
use crate::matrix::Matrix;
use crate::statistics::{coding_gain_db, jacobi_eigen, CorrelationMatrix, VarianceVector, GAIN_FLOOR};
use crate::transform::{hypercube_pair, HyGTModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    GreedyJacobi,
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Coordinate-descent sweeps per restart.
    pub max_sweeps: usize,
    /// Stop a restart once a sweep improves the gain by less than this (dB).
    pub gain_tolerance: f64,
    pub seed: u64,
    /// Initialization of restart 0; later restarts always use random angles.
    pub init_mode: InitMode,
    /// Run restarts on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_sweeps: 50,
            gain_tolerance: 1e-4,
            seed: 0,
            init_mode: InitMode::GreedyJacobi,
            parallel: true,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            bail_arg!("restarts must be at least 1");
        }
        if self.gain_tolerance.is_nan() || self.gain_tolerance <= 0.0 {
            bail_arg!("gain tolerance must be positive, got {}", self.gain_tolerance);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Final gain of every start at the requested round count: the configured
    /// restarts, then (for `R ≥ 2`) the warm start from the `R − 1` optimum.
    pub final_gain_db: Vec<f64>,
    pub best_restart: usize,
    /// Gain after initialization followed by the gain after every accepted sweep.
    pub trajectories: Vec<Vec<f64>>,
    /// Best gain reached with `1, 2, …, R` rounds.
    pub stage_gains_db: Vec<f64>,
    pub klt_gain_db: f64,
    /// Best gain over KLT gain; 1 when the KLT itself has no gain.
    pub gain_ratio: f64,
}

impl TrainingReport {
    pub fn best_gain_db(&self) -> f64 {
        self.final_gain_db[self.best_restart]
    }
}

/// `A ← G·A·Gᵀ` for the butterfly `(m, n)`.
#[inline]
pub(crate) fn conjugate(a: &mut Matrix, m: usize, n: usize, c: f64, s: f64) {
    rotate_rows(a, m, n, c, s);
    rotate_cols(a, m, n, c, s);
}

#[inline]
fn rotate_rows(a: &mut Matrix, m: usize, n: usize, c: f64, s: f64) {
    for k in 0..a.dim() {
        let (x, y) = (a[(m, k)], a[(n, k)]);
        a[(m, k)] = c * x + s * y;
        a[(n, k)] = -s * x + c * y;
    }
}

#[inline]
fn rotate_cols(a: &mut Matrix, m: usize, n: usize, c: f64, s: f64) {
    for k in 0..a.dim() {
        let (x, y) = (a[(k, m)], a[(k, n)]);
        a[(k, m)] = c * x + s * y;
        a[(k, n)] = -s * x + c * y;
    }
}

fn conjugate_pass(a: &mut Matrix, model: &HyGTModel, global_pass: usize) {
    let k = 1usize << model.pass_bit(global_pass);
    for (j, &theta) in model.pass_angles(global_pass).iter().enumerate() {
        let (m, n) = hypercube_pair(j, k);
        let (s, c) = theta.sin_cos();
        conjugate(a, m, n, c, s);
    }
}

/// `T_p·Φ·T_pᵀ` for the first `passes` passes of `model`, applied pair by pair
/// on rows and columns in O(N²) per pass. The permutation is not applied.
pub fn propagate_covariance(model: &HyGTModel, passes: usize, phi: &CorrelationMatrix) -> Result<CorrelationMatrix> {
    if phi.dim() != model.dim() {
        bail_arg!("model dimension is {} but correlation is {}x{}", model.dim(), phi.dim(), phi.dim());
    }
    if passes > model.pass_count() {
        bail_arg!("model has {} passes, asked for {passes}", model.pass_count());
    }
    let mut a = phi.matrix().clone();
    for p in 0..passes {
        conjugate_pass(&mut a, model, p);
    }
    Ok(CorrelationMatrix::from_matrix(a))
}

/// Final transformed variances of `model` on `phi`, in output order.
pub fn model_variances(model: &HyGTModel, phi: &CorrelationMatrix) -> Result<VarianceVector> {
    let v = propagate_covariance(model, model.pass_count(), phi)?.diagonal().0;
    Ok(VarianceVector(match model.permutation() {
        Some(perm) => perm.iter().map(|&i| v[i]).collect(),
        None => v,
    }))
}

pub fn model_gain_db(model: &HyGTModel, phi: &CorrelationMatrix) -> Result<f64> {
    Ok(coding_gain_db(&model_variances(model, phi)?))
}

/// Angle that zeroes the cross term of a 2×2 block under the butterfly
/// convention: `θ = ½·atan2(2·φ_mn, φ_mm − φ_nn)`. An already diagonal block
/// gives `θ = 0`.
pub fn jacobi_angle(phi_mm: f64, phi_nn: f64, phi_mn: f64) -> f64 {
    if phi_mn == 0.0 {
        return 0.0;
    }
    0.5 * (2.0 * phi_mn).atan2(phi_mm - phi_nn)
}

/// Sets every angle, in application order, to the Jacobi angle of the
/// covariance propagated through all earlier butterflies.
pub fn greedy_init(phi: &CorrelationMatrix, log2_n: u32, rounds: usize) -> Result<HyGTModel> {
    let mut model = HyGTModel::identity(log2_n, rounds)?;
    greedy_fill(&mut model, phi, 0)?;
    Ok(model)
}

/// Appends one round whose angles are greedy Jacobi steps on the covariance
/// produced by `model`. Every such step can only lower the product of the
/// two variances it touches, so the gain does not decrease.
pub fn extend_greedy(model: &HyGTModel, phi: &CorrelationMatrix) -> Result<HyGTModel> {
    let mut ext = model.extend_rounds(1);
    greedy_fill(&mut ext, phi, model.pass_count())?;
    Ok(ext)
}

/// Overwrites the angles of passes `from_pass..` with greedy Jacobi angles.
fn greedy_fill(model: &mut HyGTModel, phi: &CorrelationMatrix, from_pass: usize) -> Result<()> {
    let mut a = propagate_covariance(model, from_pass, phi)?.into_matrix();
    let half = model.butterflies_per_pass();
    for p in from_pass..model.pass_count() {
        let k = 1usize << model.pass_bit(p);
        for j in 0..half {
            let (m, n) = hypercube_pair(j, k);
            let theta = jacobi_angle(a[(m, m)], a[(n, n)], a[(m, n)]);
            model.angles_mut()[p * half + j] = theta;
            let (s, c) = theta.sin_cos();
            conjugate(&mut a, m, n, c, s);
        }
    }
    Ok(())
}

const GRID_POINTS: usize = 64;
const GOLDEN_ITERATIONS: usize = 40;

/// Per-butterfly data for evaluating the final variances as a function of one angle.
struct Coordinate {
    q: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    ym: Vec<f64>,
    yn: Vec<f64>,
    cmm: f64,
    cmn: f64,
    cnn: f64,
    floor: f64,
}

impl Coordinate {
    #[inline]
    fn extra(&self, i: usize, c: f64, s: f64) -> f64 {
        let (ym, yn) = (self.ym[i], self.yn[i]);
        let dm = (c - 1.0) * ym - s * yn;
        let dn = s * ym + (c - 1.0) * yn;
        2.0 * (dm * self.a[i] + dn * self.b[i]) + dm * dm * self.cmm + 2.0 * dm * dn * self.cmn + dn * dn * self.cnn
    }

    fn variance(&self, i: usize, c: f64, s: f64) -> f64 {
        self.q[i] + self.extra(i, c, s)
    }

    /// `Σ ln v_i(θ)`; minimizing it maximizes the coding gain since the trace is fixed.
    fn objective(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (0..self.q.len()).map(|i| self.variance(i, c, s).max(self.floor).ln()).sum()
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn best_angle(coord: &Coordinate, current: f64) -> (f64, f64) {
    let f_current = coord.objective(current);
    let jac = jacobi_angle(coord.cmm, coord.cnn, coord.cmn);
    let step = TAU / GRID_POINTS as f64;
    let candidates = (0..4)
        .map(|k| jac + k as f64 * FRAC_PI_2)
        .chain((0..GRID_POINTS).map(|g| g as f64 * step));
    let (mut best, mut f_best) = (current, f_current);
    for theta in candidates {
        let f = coord.objective(theta);
        if f < f_best {
            best = theta;
            f_best = f;
        }
    }
    let (refined, f_refined) = golden_section(|t| coord.objective(t), best - step, best + step);
    if f_refined < f_best {
        best = refined;
        f_best = f_refined;
    }
    if f_best < f_current {
        (best.rem_euclid(TAU), f_best)
    } else {
        (current, f_current)
    }
}

/// Variances `diag(S·C·Sᵀ)`.
fn sandwich_diagonal(s: &Matrix, c: &Matrix) -> Vec<f64> {
    let n = s.dim();
    let mut tmp = vec![0.0; n];
    (0..n)
        .map(|i| {
            let si = s.row(i);
            for (j, t) in tmp.iter_mut().enumerate() {
                *t = c.row(j).iter().zip(si).map(|(x, y)| x * y).sum();
            }
            si.iter().zip(&tmp).map(|(x, y)| x * y).sum()
        })
        .collect()
}

/// One cyclic sweep of exact coordinate descent over every angle.
fn sweep(model: &mut HyGTModel, phi: &Matrix) {
    let n = model.dim();
    let half = model.butterflies_per_pass();
    let total = model.pass_count();

    // suffix = G_{L-1}···G_1, the product of every pass after pass 0.
    let mut suffix = Matrix::identity(n);
    for p in 1..total {
        let k = 1usize << model.pass_bit(p);
        for (j, &theta) in model.pass_angles(p).iter().enumerate() {
            let (mi, ni) = hypercube_pair(j, k);
            let (s, c) = theta.sin_cos();
            rotate_rows(&mut suffix, mi, ni, c, s);
        }
    }
    let mut cov = phi.clone();
    let trace = cov.trace().abs();
    let floor = GAIN_FLOOR * (trace / n as f64).max(f64::MIN_POSITIVE);

    let mut coord = Coordinate {
        q: vec![0.0; n],
        a: vec![0.0; n],
        b: vec![0.0; n],
        ym: vec![0.0; n],
        yn: vec![0.0; n],
        cmm: 0.0,
        cmn: 0.0,
        cnn: 0.0,
        floor,
    };

    for p in 0..total {
        let k = 1usize << model.pass_bit(p);
        if p > 0 {
            // suffix ← suffix·G_pᵀ drops pass p from the product.
            for (j, &theta) in model.pass_angles(p).iter().enumerate() {
                let (mi, ni) = hypercube_pair(j, k);
                let (s, c) = theta.sin_cos();
                rotate_cols(&mut suffix, mi, ni, c, s);
            }
        }
        conjugate_pass(&mut cov, model, p);
        let mut d = sandwich_diagonal(&suffix, &cov);

        for j in 0..half {
            let (mi, ni) = hypercube_pair(j, k);
            let old = model.pass_angles(p)[j];
            let (s0, c0) = old.sin_cos();
            conjugate(&mut cov, mi, ni, c0, -s0);

            coord.cmm = cov[(mi, mi)];
            coord.cnn = cov[(ni, ni)];
            coord.cmn = cov[(mi, ni)];
            let (row_m, row_n) = (cov.row(mi), cov.row(ni));
            for i in 0..n {
                let si = suffix.row(i);
                coord.a[i] = row_m.iter().zip(si).map(|(x, y)| x * y).sum();
                coord.b[i] = row_n.iter().zip(si).map(|(x, y)| x * y).sum();
                coord.ym[i] = si[mi];
                coord.yn[i] = si[ni];
            }
            let q = d.iter().enumerate().map(|(i, &di)| di - coord.extra(i, c0, s0)).collect();
            coord.q = q;

            let (theta, _) = best_angle(&coord, old);
            let (s1, c1) = theta.sin_cos();
            for (i, di) in d.iter_mut().enumerate() {
                *di = coord.variance(i, c1, s1);
            }
            model.angles_mut()[p * half + j] = theta;
            conjugate(&mut cov, mi, ni, c1, s1);
        }
    }
}

/// Coordinate descent from `model` until the per-sweep gain improvement drops
/// below `gain_tolerance` or `max_sweeps` is reached. Returns the refined model
/// and the gain trajectory (initial gain first). The trajectory never decreases:
/// a sweep that would lower the measured gain is discarded.
pub fn refine(
    model: HyGTModel,
    phi: &CorrelationMatrix,
    max_sweeps: usize,
    gain_tolerance: f64,
) -> Result<(HyGTModel, Vec<f64>)> {
    let mut current = model.without_permutation();
    let mut gain = model_gain_db(&current, phi)?;
    let mut trajectory = vec![gain];
    for _ in 0..max_sweeps {
        let mut candidate = current.clone();
        sweep(&mut candidate, phi.matrix());
        let next = model_gain_db(&candidate, phi)?;
        if !next.is_finite() {
            return Err(Error::Numerical(format!("coordinate descent produced gain {next}")));
        }
        if next < gain {
            break;
        }
        let improvement = next - gain;
        current = candidate;
        gain = next;
        trajectory.push(gain);
        if improvement < gain_tolerance {
            break;
        }
    }
    Ok((current, trajectory))
}

fn random_model(log2_n: u32, rounds: usize, seed: u64, stream: u64) -> Result<HyGTModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let count = crate::transform::num_parameters(log2_n, rounds);
    let angles = (0..count).map(|_| rng.random_range(0.0..TAU)).collect();
    HyGTModel::new(log2_n, rounds, angles, None)
}

fn initial_model(
    phi: &CorrelationMatrix,
    log2_n: u32,
    rounds: usize,
    config: &OptimizerConfig,
    restart: usize,
) -> Result<HyGTModel> {
    // Streams are keyed by (round count, restart) so every stage draws fresh angles.
    let stream = ((rounds as u64) << 32) | restart as u64;
    let mode = if restart == 0 { config.init_mode } else { InitMode::Random };
    match mode {
        InitMode::GreedyJacobi => greedy_init(phi, log2_n, rounds),
        InitMode::Zero => HyGTModel::identity(log2_n, rounds),
        InitMode::Random => random_model(log2_n, rounds, config.seed, stream),
    }
}

fn check_psd(phi: &CorrelationMatrix) -> Result<f64> {
    let klt = jacobi_eigen(phi)?;
    let tol = 1e-10 * phi.trace().abs();
    if let Some(&min) = klt.eigenvalues.last() {
        if min < -tol {
            bail_arg!("correlation matrix is not positive semi-definite (eigenvalue {min:e})");
        }
    }
    Ok(klt.gain_db())
}

/// Multi-restart search for the angles with the highest coding gain.
///
/// Restart 0 starts from `config.init_mode` (greedy Jacobi by default) and the
/// others from uniform random angles. The search is repeated for every round
/// count `1..=rounds`; from the second round count on, one extra start is added:
/// the previous round count's best model extended by a greedy Jacobi round.
/// That start already reaches the previous optimum and descent never lowers
/// the gain, so the best gain is non-decreasing in the round count.
///
/// The best start wins; ties go to the lowest index, so parallel and serial
/// runs return the same model.
pub fn optimize(
    phi: &CorrelationMatrix,
    log2_n: u32,
    rounds: usize,
    config: &OptimizerConfig,
) -> Result<(HyGTModel, TrainingReport)> {
    config.validate()?;
    let probe = HyGTModel::identity(log2_n, rounds)?;
    if phi.dim() != probe.dim() {
        bail_arg!("model dimension is {} but correlation is {}x{}", probe.dim(), phi.dim(), phi.dim());
    }
    let klt_gain_db = check_psd(phi)?;

    let mut carried: Option<HyGTModel> = None;
    let mut stage_gains_db = Vec::with_capacity(rounds);
    let mut last = None;
    for stage in 1..=rounds {
        let starts = config.restarts + usize::from(carried.is_some());
        let prev = carried.as_ref();
        let run = |start: usize| -> Result<(HyGTModel, Vec<f64>)> {
            let init = match prev {
                Some(prev) if start == config.restarts => extend_greedy(prev, phi)?,
                _ => initial_model(phi, log2_n, stage, config, start)?,
            };
            refine(init, phi, config.max_sweeps, config.gain_tolerance)
        };
        let results: Vec<(HyGTModel, Vec<f64>)> = if config.parallel {
            (0..starts).into_par_iter().map(run).collect::<Result<_>>()?
        } else {
            (0..starts).map(run).collect::<Result<_>>()?
        };
        let final_gain_db: Vec<f64> =
            results.iter().map(|(_, t)| *t.last().expect("trajectory is never empty")).collect();
        let mut best_restart = 0;
        for (i, &g) in final_gain_db.iter().enumerate() {
            if g > final_gain_db[best_restart] {
                best_restart = i;
            }
        }
        stage_gains_db.push(final_gain_db[best_restart]);
        let (models, trajectories): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        carried = models.into_iter().nth(best_restart);
        last = Some((final_gain_db, best_restart, trajectories));
    }

    let (final_gain_db, best_restart, trajectories) = last.expect("at least one round");
    let best_gain = final_gain_db[best_restart];
    let gain_ratio = if klt_gain_db > 0.0 { best_gain / klt_gain_db } else { 1.0 };
    Ok((
        carried.expect("best model exists"),
        TrainingReport { final_gain_db, best_restart, trajectories, stage_gains_db, klt_gain_db, gain_ratio },
    ))
}

/// Attaches the sorting pass that orders outputs by non-increasing variance
/// (ties by ascending coefficient index).
pub fn variance_permutation(model: HyGTModel, phi: &CorrelationMatrix) -> Result<HyGTModel> {
    if model.permutation().is_some() {
        bail_arg!("model already has a permutation");
    }
    let v = model_variances(&model, phi)?;
    let perm = sort_by_variance(v.as_slice());
    model.with_permutation(perm)
}

pub(crate) fn sort_by_variance(v: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..v.len()).collect();
    perm.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
    perm
}
