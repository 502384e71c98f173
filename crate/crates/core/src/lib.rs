//! Hypercube-Givens transforms (HyGT).
//!
//! Low-complexity, non-separable orthogonal transforms built from rounds of
//! parallel Givens-rotation passes on hypercube edges, together with the
//! statistics and training needed to fit them to a source's KLT.
//!
//! - [`transform`]: float forward/inverse, schedules, matrix materialization
//! - [`fixedpoint`]: angle codes, the shared trig table, integer evaluation, memory accounting
//! - [`statistics`]: correlation estimation, Jacobi KLT, coding gain, AR(1) sources
//! - [`optimizer`]: greedy Jacobi initialization and multi-restart coordinate descent

pub mod dataset;
pub mod error;
pub mod fixedpoint;
pub mod matrix;
pub mod optimizer;
pub mod statistics;
pub mod transform;

pub use dataset::{Block, ResidualDataset};
pub use error::{Error, Result};
pub use fixedpoint::{
    build_trig_table, forward_fixed, inverse_fixed, memory_footprint, quantize_model, QuantizedHyGTModel,
    TransformKind, TrigTable, DEFAULT_ANGLE_BITS, DEFAULT_PRECISION_BITS,
};
pub use matrix::Matrix;
pub use optimizer::{
    extend_greedy, greedy_init, jacobi_angle, model_gain_db, model_variances, optimize, propagate_covariance, refine,
    variance_permutation, InitMode, OptimizerConfig, TrainingReport,
};
pub use statistics::{
    accumulate_correlation, ar1_covariance, ar1_covariance_2d, coding_gain, coding_gain_db, jacobi_eigen,
    klt_forward, sample_residuals, transformed_variances, CodingGain, CorrelationAccumulator, CorrelationMatrix,
    KLTResult, ResidualSampler, VarianceVector,
};
pub use transform::{
    apply_butterfly, apply_pass, hypercube_indices, num_parameters, GivensRotation, HyGTModel, PassIndexing,
};
