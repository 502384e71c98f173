//! JSON reports. Keys are emitted in declaration order and gains are rounded
//! to four decimals so reports diff cleanly.

use serde::Serialize;

pub(crate) fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// HyGT gain over KLT gain, or 1 when the KLT has no gain to approach.
pub(crate) fn gain_ratio(hygt_db: f64, klt_db: f64) -> f64 {
    if klt_db.abs() < 1e-12 {
        1.0
    } else {
        hygt_db / klt_db
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedClass {
    pub class_id: usize,
    pub samples: usize,
    /// False when the class had fewer samples than the block dimension and
    /// received an identity model.
    pub trained: bool,
    pub hygt_gain_db: f64,
    pub klt_gain_db: f64,
    pub gain_ratio: f64,
    /// Float gain of the stored (quantized) angles, when quantization is on.
    pub quantized_gain_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub log2_n: u32,
    pub rounds: usize,
    pub restarts: usize,
    pub seed: u64,
    pub angle_bits: u32,
    pub precision_bits: u32,
    pub classes: Vec<TrainedClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassEval {
    pub class_id: usize,
    pub rounds: usize,
    pub samples: usize,
    /// `None` when the dataset holds no blocks of this class.
    pub hygt_gain_db: Option<f64>,
    pub klt_gain_db: Option<f64>,
    pub gain_ratio: Option<f64>,
    pub parameters: usize,
    pub hygt_memory: u64,
    pub klt_memory: u64,
    pub memory_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleEval {
    pub log2_n: u32,
    pub angle_bits: u32,
    pub classes: Vec<ClassEval>,
    pub hygt_memory: u64,
    pub klt_memory: u64,
    pub memory_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub transforms: usize,
    pub hygt_memory: u64,
    pub klt_memory: u64,
    pub memory_ratio: f64,
    /// Means over classes that had data.
    pub mean_hygt_gain_db: Option<f64>,
    pub mean_klt_gain_db: Option<f64>,
    pub mean_gain_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub bundles: Vec<BundleEval>,
    pub aggregate: Aggregate,
}

pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports contain only finite numbers and strings");
    s.push('\n');
    s
}
