use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use hygt_core::{
    accumulate_correlation, ar1_covariance_2d, build_trig_table, forward_fixed, inverse_fixed, jacobi_eigen,
    memory_footprint, model_gain_db, num_parameters, optimize, quantize_model, variance_permutation, Block,
    CorrelationMatrix, HyGTModel, Matrix, OptimizerConfig, ResidualDataset, ResidualSampler, TransformKind,
    DEFAULT_PRECISION_BITS,
};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::format::{read_bundle, read_dataset, write_bundle, write_dataset, BundleModels, ModelBundle, SampleFormat};
use crate::report::{gain_ratio, round4, Aggregate, BundleEval, ClassEval, EvalReport, TrainReport, TrainedClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Float,
    Fixed,
}

fn arg(msg: impl Into<String>) -> CliError {
    CliError::Argument(msg.into())
}

pub fn load_dataset(path: &Path) -> Result<ResidualDataset> {
    let file = File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    Ok(read_dataset(&mut BufReader::new(file))?.0)
}

pub fn save_dataset(path: &Path, data: &ResidualDataset, format: SampleFormat) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, data, format)?;
    write_file(path, &buf)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let file = File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    read_bundle(&mut BufReader::new(file))
}

pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let mut buf = Vec::new();
    write_bundle(&mut buf, bundle)?;
    write_file(path, &buf)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let context = || format!("cannot write {}", path.display());
    let file = File::create(path).map_err(|e| CliError::io(context(), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| CliError::io(context(), e))
}

/// `count` blocks per class of a 2-D AR(1) source; class `k` uses `ρ^(1 + k/10)`
/// and ChaCha stream `k`.
pub fn generate(block_size: usize, rho: f64, count: usize, classes: usize, seed: u64) -> Result<ResidualDataset> {
    if block_size < 2 || !block_size.is_power_of_two() {
        return Err(arg(format!("block size must be a power of two >= 2, got {block_size}")));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(arg(format!("rho must be in [0, 1), got {rho}")));
    }
    if count == 0 || classes == 0 {
        return Err(arg("count and classes must be positive"));
    }
    if classes > u16::MAX as usize {
        return Err(arg(format!("at most {} classes are storable", u16::MAX)));
    }
    let mut blocks = Vec::with_capacity(count * classes);
    for k in 0..classes {
        let rho_k = rho.powf(1.0 + k as f64 / 10.0);
        let sampler = ResidualSampler::new(&ar1_covariance_2d(block_size, rho_k)?)?;
        blocks.extend(sampler.sample(count, seed, k as u64, k));
    }
    Ok(ResidualDataset::new(block_size * block_size, classes, blocks)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub rounds: usize,
    pub restarts: usize,
    pub seed: u64,
    /// 0 keeps float angles.
    pub angle_bits: u32,
    pub precision_bits: u32,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { rounds: 2, restarts: 4, seed: 0, angle_bits: 0, precision_bits: DEFAULT_PRECISION_BITS }
    }
}

fn class_correlation(data: &ResidualDataset, class: usize) -> Result<Option<CorrelationMatrix>> {
    if data.class_count(class) == 0 {
        return Ok(None);
    }
    Ok(Some(accumulate_correlation(data.vectors_of_class(class))?))
}

fn dataset_log2(data: &ResidualDataset) -> Result<u32> {
    let dim = data.dim();
    if dim < 2 || !dim.is_power_of_two() {
        return Err(arg(format!("dataset dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros())
}

/// Trains one model per class. Classes run concurrently; results keep class order.
/// Warnings (identity fallbacks) are returned for the caller to print.
pub fn train(data: &ResidualDataset, opts: &TrainOptions) -> Result<(ModelBundle, TrainReport, Vec<String>)> {
    let log2_n = dataset_log2(data)?;
    if opts.rounds == 0 || opts.rounds > u8::MAX as usize {
        return Err(arg(format!("rounds must be in 1..=255, got {}", opts.rounds)));
    }
    if opts.angle_bits > 12 {
        return Err(arg(format!("angle bits must be 0 (float) or 1..=12, got {}", opts.angle_bits)));
    }
    // Validate the table parameters before spending time on training.
    build_trig_table(opts.angle_bits.max(1), opts.precision_bits)?;
    let dim = data.dim();

    let trained: Vec<(HyGTModel, TrainedClass, Option<String>)> = (0..data.classes())
        .into_par_iter()
        .map(|class| -> Result<_> {
            let samples = data.class_count(class);
            let phi = class_correlation(data, class)?;
            let (model, hygt, klt, warning) = match phi {
                Some(phi) if samples >= dim => {
                    let config = OptimizerConfig {
                        restarts: opts.restarts,
                        seed: opts.seed.wrapping_add(class as u64),
                        ..Default::default()
                    };
                    let (model, report) = optimize(&phi, log2_n, opts.rounds, &config)?;
                    let model = variance_permutation(model, &phi)?;
                    let gain = model_gain_db(&model, &phi)?;
                    (model, Some((gain, phi)), report.klt_gain_db, None)
                }
                phi => {
                    let model = HyGTModel::identity(log2_n, opts.rounds)?;
                    let klt = match &phi {
                        Some(p) => jacobi_eigen(p)?.gain_db(),
                        None => 0.0,
                    };
                    let gain = match &phi {
                        Some(p) => model_gain_db(&model, p)?,
                        None => 0.0,
                    };
                    let warning = format!(
                        "class {class}: {samples} samples < dimension {dim}; using an identity model"
                    );
                    (model, phi.map(|p| (gain, p)), klt, Some(warning))
                }
            };
            let hygt_gain = hygt.as_ref().map_or(0.0, |(g, _)| *g);
            let quantized_gain_db = match (&hygt, opts.angle_bits) {
                (_, 0) => None,
                (Some((_, phi)), bits) => Some(round4(model_gain_db(&quantize_model(&model, bits)?.dequantize(), phi)?)),
                (None, _) => Some(0.0),
            };
            let summary = TrainedClass {
                class_id: class,
                samples,
                trained: warning.is_none(),
                hygt_gain_db: round4(hygt_gain),
                klt_gain_db: round4(klt),
                gain_ratio: round4(gain_ratio(hygt_gain, klt)),
                quantized_gain_db,
            };
            Ok((model, summary, warning))
        })
        .collect::<Result<_>>()?;

    let mut models = Vec::with_capacity(trained.len());
    let mut classes = Vec::with_capacity(trained.len());
    let mut warnings = Vec::new();
    for (model, summary, warning) in trained {
        models.push(model);
        classes.push(summary);
        warnings.extend(warning);
    }
    let bundle_models = if opts.angle_bits == 0 {
        BundleModels::Float(models)
    } else {
        BundleModels::Quantized(models.iter().map(|m| quantize_model(m, opts.angle_bits)).collect::<hygt_core::Result<_>>()?)
    };
    let bundle = ModelBundle::new(log2_n, opts.precision_bits, bundle_models)?;
    let report = TrainReport {
        log2_n,
        rounds: opts.rounds,
        restarts: opts.restarts,
        seed: opts.seed,
        angle_bits: opts.angle_bits,
        precision_bits: opts.precision_bits,
        classes,
    };
    Ok((bundle, report, warnings))
}

fn check_compatible(bundle: &ModelBundle, data: &ResidualDataset) -> Result<()> {
    if bundle.dim() != data.dim() {
        return Err(arg(format!("model dimension {} does not match data dimension {}", bundle.dim(), data.dim())));
    }
    if bundle.classes() != data.classes() {
        return Err(arg(format!(
            "model has {} classes but data has {}",
            bundle.classes(),
            data.classes()
        )));
    }
    Ok(())
}

/// Transforms every block with its class's model. Fixed arithmetic rounds the
/// inputs to integers and needs a quantized bundle.
pub fn apply(
    bundle: &ModelBundle,
    data: &ResidualDataset,
    direction: Direction,
    arithmetic: Arithmetic,
) -> Result<ResidualDataset> {
    check_compatible(bundle, data)?;
    let blocks: Vec<Block> = match (arithmetic, bundle.models()) {
        (Arithmetic::Float, _) => {
            let models: Vec<HyGTModel> = (0..bundle.classes()).map(|c| bundle.float_model(c)).collect();
            data.blocks()
                .par_iter()
                .map(|b| {
                    let m = &models[b.class_id];
                    let values = match direction {
                        Direction::Forward => m.forward(&b.values),
                        Direction::Inverse => m.inverse(&b.values),
                    }?;
                    Ok(Block { class_id: b.class_id, values })
                })
                .collect::<Result<_>>()?
        }
        (Arithmetic::Fixed, BundleModels::Float(_)) => {
            return Err(arg("fixed-point arithmetic needs a bundle trained with --angle-bits > 0"));
        }
        (Arithmetic::Fixed, BundleModels::Quantized(models)) => {
            let table = build_trig_table(bundle.angle_bits(), bundle.precision_bits())?;
            data.blocks()
                .par_iter()
                .map(|b| {
                    let x: Vec<i64> = b.values.iter().map(|v| v.round() as i64).collect();
                    let m = &models[b.class_id];
                    let y = match direction {
                        Direction::Forward => forward_fixed(m, &table, &x),
                        Direction::Inverse => inverse_fixed(m, &table, &x),
                    }?;
                    Ok(Block { class_id: b.class_id, values: y.into_iter().map(|v| v as f64).collect() })
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(ResidualDataset::new(data.dim(), data.classes(), blocks)?)
}

/// Gains and memory per class for every `(bundle, data)` pair, plus totals
/// over all transforms.
pub fn evaluate(pairs: &[(ModelBundle, ResidualDataset)]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(arg("evaluation needs at least one model/data pair"));
    }
    let mut bundles = Vec::with_capacity(pairs.len());
    let (mut total_hygt, mut total_klt, mut transforms) = (0u64, 0u64, 0usize);
    let mut gains = Vec::new();
    for (bundle, data) in pairs {
        check_compatible(bundle, data)?;
        let log2_n = bundle.log2_n();
        let classes: Vec<ClassEval> = (0..bundle.classes())
            .into_par_iter()
            .map(|class| -> Result<_> {
                let rounds = bundle.rounds(class);
                let hygt_memory = memory_footprint(TransformKind::Hygt, log2_n, rounds, 1);
                let klt_memory = memory_footprint(TransformKind::Klt, log2_n, rounds, 1);
                let gains = match class_correlation(data, class)? {
                    Some(phi) => {
                        let h = model_gain_db(&bundle.float_model(class), &phi)?;
                        let k = jacobi_eigen(&phi)?.gain_db();
                        Some((h, k))
                    }
                    None => None,
                };
                Ok(ClassEval {
                    class_id: class,
                    rounds,
                    samples: data.class_count(class),
                    hygt_gain_db: gains.map(|(h, _)| round4(h)),
                    klt_gain_db: gains.map(|(_, k)| round4(k)),
                    gain_ratio: gains.map(|(h, k)| round4(gain_ratio(h, k))),
                    parameters: num_parameters(log2_n, rounds),
                    hygt_memory,
                    klt_memory,
                    memory_ratio: round4(memory_ratio(klt_memory, hygt_memory)),
                })
            })
            .collect::<Result<_>>()?;
        let hygt_memory: u64 = classes.iter().map(|c| c.hygt_memory).sum();
        let klt_memory: u64 = classes.iter().map(|c| c.klt_memory).sum();
        total_hygt += hygt_memory;
        total_klt += klt_memory;
        transforms += classes.len();
        gains.extend(classes.iter().filter_map(|c| Some((c.hygt_gain_db?, c.klt_gain_db?, c.gain_ratio?))));
        bundles.push(BundleEval {
            log2_n,
            angle_bits: bundle.angle_bits(),
            classes,
            hygt_memory,
            klt_memory,
            memory_ratio: round4(memory_ratio(klt_memory, hygt_memory)),
        });
    }
    let mean = |f: fn(&(f64, f64, f64)) -> f64| {
        (!gains.is_empty()).then(|| round4(gains.iter().map(f).sum::<f64>() / gains.len() as f64))
    };
    let aggregate = Aggregate {
        transforms,
        hygt_memory: total_hygt,
        klt_memory: total_klt,
        memory_ratio: round4(memory_ratio(total_klt, total_hygt)),
        mean_hygt_gain_db: mean(|g| g.0),
        mean_klt_gain_db: mean(|g| g.1),
        mean_gain_ratio: mean(|g| g.2),
    };
    Ok(EvalReport { bundles, aggregate })
}

fn memory_ratio(klt: u64, hygt: u64) -> f64 {
    // Zero-round models store nothing; report the ratio as unbounded.
    if hygt == 0 {
        f64::INFINITY
    } else {
        klt as f64 / hygt as f64
    }
}

/// The class transform as `N` lines of `N` values with 17 significant digits.
pub fn export_matrix(bundle: &ModelBundle, class: usize) -> Result<String> {
    if class >= bundle.classes() {
        return Err(arg(format!("class {class} out of range; bundle has {} classes", bundle.classes())));
    }
    let t = bundle.float_model(class).to_matrix();
    let mut out = String::new();
    for i in 0..t.dim() {
        let row: Vec<String> = t.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Reads the text written by [`export_matrix`].
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| CliError::Format(format!("bad matrix entry {t:?}: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 {
        return Err(CliError::Format("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Format("matrix text is not square".into()));
    }
    Ok(Matrix::from_row_major(n, rows.concat()).expect("rows are square"))
}
