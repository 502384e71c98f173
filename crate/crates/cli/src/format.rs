//! Binary dataset (`RBLK`) and model bundle (`HYGT`) files. All integers are
//! little-endian.
//!
//! ```text
//! RBLK  magic "RBLK", u8 version, u8 log2_n, u16 classes, u32 blocks,
//!       then per block: u16 class id, N values (f32 for version 1, f64 for version 2)
//! HYGT  magic "HYGT", u8 version = 1, u8 log2_n, u16 classes, u8 angle_bits (0 = f64 angles),
//!       u8 precision_bits, then per class: u8 rounds, u8 has_permutation,
//!       the angles (f64, u8 codes when angle_bits <= 8, u16 codes otherwise),
//!       and N u16 permutation indices when present
//! ```

use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use hygt_core::{num_parameters, Block, HyGTModel, QuantizedHyGTModel, ResidualDataset, DEFAULT_PRECISION_BITS};

use crate::error::{CliError, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"RBLK";
pub const BUNDLE_MAGIC: &[u8; 4] = b"HYGT";
pub const BUNDLE_VERSION: u8 = 1;

/// Sample precision of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    /// Version 1: float32 samples.
    F32,
    /// Version 2: float64 samples, used for transform outputs.
    F64,
}

impl SampleFormat {
    fn version(self) -> u8 {
        match self {
            SampleFormat::F32 => 1,
            SampleFormat::F64 => 2,
        }
    }
}

fn format_err(e: io::Error) -> CliError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        CliError::Format("unexpected end of file".into())
    } else {
        CliError::io("read failed", e)
    }
}

fn write_err(e: io::Error) -> CliError {
    CliError::io("write failed", e)
}

fn log2_of(dim: usize) -> Result<u8> {
    if !dim.is_power_of_two() || !(2..=1 << 16).contains(&dim) {
        return Err(CliError::Argument(format!("dimension {dim} is not a power of two in 2..=65536")));
    }
    Ok(dim.trailing_zeros() as u8)
}

fn check_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(format_err)?;
    if &buf != magic {
        return Err(CliError::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

fn read_log2(r: &mut impl Read) -> Result<u32> {
    // Permutation indices are u16, which caps N at 2^16.
    let log2_n = r.read_u8().map_err(format_err)? as u32;
    if !(1..=16).contains(&log2_n) {
        return Err(CliError::Format(format!("log2_n {log2_n} out of range 1..=16")));
    }
    Ok(log2_n)
}

fn read_classes(r: &mut impl Read) -> Result<usize> {
    let classes = r.read_u16::<LE>().map_err(format_err)? as usize;
    if classes == 0 {
        return Err(CliError::Format("class count is zero".into()));
    }
    Ok(classes)
}

pub fn write_dataset(w: &mut impl Write, data: &ResidualDataset, format: SampleFormat) -> Result<()> {
    let log2_n = log2_of(data.dim())?;
    let classes = u16::try_from(data.classes())
        .map_err(|_| CliError::Argument(format!("{} classes exceed the u16 limit", data.classes())))?;
    let count = u32::try_from(data.len())
        .map_err(|_| CliError::Argument(format!("{} blocks exceed the u32 limit", data.len())))?;
    w.write_all(DATASET_MAGIC).map_err(write_err)?;
    w.write_u8(format.version()).map_err(write_err)?;
    w.write_u8(log2_n).map_err(write_err)?;
    w.write_u16::<LE>(classes).map_err(write_err)?;
    w.write_u32::<LE>(count).map_err(write_err)?;
    for block in data.blocks() {
        w.write_u16::<LE>(block.class_id as u16).map_err(write_err)?;
        for &v in &block.values {
            match format {
                SampleFormat::F32 => w.write_f32::<LE>(v as f32),
                SampleFormat::F64 => w.write_f64::<LE>(v),
            }
            .map_err(write_err)?;
        }
    }
    Ok(())
}

pub fn read_dataset(r: &mut impl Read) -> Result<(ResidualDataset, SampleFormat)> {
    check_magic(r, DATASET_MAGIC)?;
    let format = match r.read_u8().map_err(format_err)? {
        1 => SampleFormat::F32,
        2 => SampleFormat::F64,
        v => return Err(CliError::Format(format!("unsupported dataset version {v}"))),
    };
    let dim = 1usize << read_log2(r)?;
    let classes = read_classes(r)?;
    let count = r.read_u32::<LE>().map_err(format_err)? as usize;
    let mut blocks = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let class_id = r.read_u16::<LE>().map_err(format_err)? as usize;
        if class_id >= classes {
            return Err(CliError::Format(format!("block {i} has class {class_id} but only {classes} classes exist")));
        }
        let mut values = vec![0.0; dim];
        for v in values.iter_mut() {
            *v = match format {
                SampleFormat::F32 => r.read_f32::<LE>().map_err(format_err)? as f64,
                SampleFormat::F64 => r.read_f64::<LE>().map_err(format_err)?,
            };
        }
        blocks.push(Block { class_id, values });
    }
    expect_eof(r)?;
    let data = ResidualDataset::new(dim, classes, blocks).map_err(|e| CliError::Format(e.to_string()))?;
    Ok((data, format))
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(()),
        Ok(_) => Err(CliError::Format("trailing bytes after payload".into())),
        Err(e) => Err(CliError::io("read failed", e)),
    }
}

/// Per-class models of a bundle. Either all float or all quantized with one width.
#[derive(Debug, Clone, PartialEq)]
pub enum BundleModels {
    Float(Vec<HyGTModel>),
    Quantized(Vec<QuantizedHyGTModel>),
}

/// One HyGT per class, all of the same size, plus the trig-table precision
/// used for integer evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    log2_n: u32,
    precision_bits: u32,
    models: BundleModels,
}

impl ModelBundle {
    pub fn new(log2_n: u32, precision_bits: u32, models: BundleModels) -> Result<Self> {
        let bad = |msg: String| Err(CliError::Argument(msg));
        if !(1..=16).contains(&log2_n) {
            return bad(format!("log2_n {log2_n} out of range 1..=16"));
        }
        if !(4..=15).contains(&precision_bits) {
            return bad(format!("precision bits must be in 4..=15, got {precision_bits}"));
        }
        let shapes: Vec<(u32, usize)> = match &models {
            BundleModels::Float(ms) => ms.iter().map(|m| (m.log2_n(), m.rounds())).collect(),
            BundleModels::Quantized(ms) => {
                if let Some(first) = ms.first() {
                    if ms.iter().any(|m| m.angle_bits() != first.angle_bits()) {
                        return bad("quantized models use different angle widths".into());
                    }
                }
                ms.iter().map(|m| (m.log2_n(), m.rounds())).collect()
            }
        };
        if shapes.is_empty() || shapes.len() > u16::MAX as usize {
            return bad(format!("bundle needs 1..=65535 classes, got {}", shapes.len()));
        }
        for (class, &(l, rounds)) in shapes.iter().enumerate() {
            if l != log2_n {
                return bad(format!("class {class} has log2_n {l}, bundle has {log2_n}"));
            }
            if rounds > u8::MAX as usize {
                return bad(format!("class {class} has {rounds} rounds; at most 255 are storable"));
            }
        }
        Ok(Self { log2_n, precision_bits, models })
    }

    pub fn float(models: Vec<HyGTModel>) -> Result<Self> {
        let log2_n = models.first().map_or(0, HyGTModel::log2_n);
        Self::new(log2_n, DEFAULT_PRECISION_BITS, BundleModels::Float(models))
    }

    pub fn log2_n(&self) -> u32 {
        self.log2_n
    }

    pub fn dim(&self) -> usize {
        1 << self.log2_n
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// 0 for float angles.
    pub fn angle_bits(&self) -> u32 {
        match &self.models {
            BundleModels::Float(_) => 0,
            BundleModels::Quantized(ms) => ms[0].angle_bits(),
        }
    }

    pub fn models(&self) -> &BundleModels {
        &self.models
    }

    pub fn classes(&self) -> usize {
        match &self.models {
            BundleModels::Float(ms) => ms.len(),
            BundleModels::Quantized(ms) => ms.len(),
        }
    }

    pub fn rounds(&self, class: usize) -> usize {
        match &self.models {
            BundleModels::Float(ms) => ms[class].rounds(),
            BundleModels::Quantized(ms) => ms[class].rounds(),
        }
    }

    /// Float view of a class model; quantized angles are dequantized.
    pub fn float_model(&self, class: usize) -> HyGTModel {
        match &self.models {
            BundleModels::Float(ms) => ms[class].clone(),
            BundleModels::Quantized(ms) => ms[class].dequantize(),
        }
    }
}

pub fn write_bundle(w: &mut impl Write, bundle: &ModelBundle) -> Result<()> {
    let angle_bits = bundle.angle_bits();
    w.write_all(BUNDLE_MAGIC).map_err(write_err)?;
    w.write_u8(BUNDLE_VERSION).map_err(write_err)?;
    w.write_u8(bundle.log2_n as u8).map_err(write_err)?;
    w.write_u16::<LE>(bundle.classes() as u16).map_err(write_err)?;
    w.write_u8(angle_bits as u8).map_err(write_err)?;
    w.write_u8(bundle.precision_bits as u8).map_err(write_err)?;
    let write_perm = |w: &mut dyn Write, perm: Option<&[usize]>| -> io::Result<()> {
        if let Some(perm) = perm {
            for &p in perm {
                w.write_u16::<LE>(p as u16)?;
            }
        }
        Ok(())
    };
    match &bundle.models {
        BundleModels::Float(ms) => {
            for m in ms {
                w.write_u8(m.rounds() as u8).map_err(write_err)?;
                w.write_u8(m.permutation().is_some() as u8).map_err(write_err)?;
                for &a in m.angles() {
                    w.write_f64::<LE>(a).map_err(write_err)?;
                }
                write_perm(w, m.permutation()).map_err(write_err)?;
            }
        }
        BundleModels::Quantized(ms) => {
            for m in ms {
                w.write_u8(m.rounds() as u8).map_err(write_err)?;
                w.write_u8(m.permutation().is_some() as u8).map_err(write_err)?;
                for &c in m.angle_codes() {
                    if angle_bits <= 8 {
                        w.write_u8(c as u8)
                    } else {
                        w.write_u16::<LE>(c)
                    }
                    .map_err(write_err)?;
                }
                write_perm(w, m.permutation()).map_err(write_err)?;
            }
        }
    }
    Ok(())
}

pub fn read_bundle(r: &mut impl Read) -> Result<ModelBundle> {
    check_magic(r, BUNDLE_MAGIC)?;
    let version = r.read_u8().map_err(format_err)?;
    if version != BUNDLE_VERSION {
        return Err(CliError::Format(format!("unsupported bundle version {version}")));
    }
    let log2_n = read_log2(r)?;
    let dim = 1usize << log2_n;
    let classes = read_classes(r)?;
    let angle_bits = r.read_u8().map_err(format_err)? as u32;
    let precision_bits = r.read_u8().map_err(format_err)? as u32;
    let invalid = |e: hygt_core::Error| CliError::Format(e.to_string());

    let mut float = Vec::new();
    let mut quantized = Vec::new();
    for class in 0..classes {
        let rounds = r.read_u8().map_err(format_err)? as usize;
        let has_perm = match r.read_u8().map_err(format_err)? {
            0 => false,
            1 => true,
            v => return Err(CliError::Format(format!("class {class}: permutation flag {v} is not 0 or 1"))),
        };
        let count = num_parameters(log2_n, rounds);
        let mut angles = Vec::new();
        let mut codes = Vec::new();
        if angle_bits == 0 {
            angles.reserve(count);
            for _ in 0..count {
                angles.push(r.read_f64::<LE>().map_err(format_err)?);
            }
        } else {
            codes.reserve(count);
            for _ in 0..count {
                codes.push(if angle_bits <= 8 {
                    r.read_u8().map_err(format_err)? as u16
                } else {
                    r.read_u16::<LE>().map_err(format_err)?
                });
            }
        }
        let perm = if has_perm {
            let mut p = Vec::with_capacity(dim);
            for _ in 0..dim {
                p.push(r.read_u16::<LE>().map_err(format_err)? as usize);
            }
            Some(p)
        } else {
            None
        };
        if angle_bits == 0 {
            float.push(HyGTModel::new(log2_n, rounds, angles, perm).map_err(invalid)?);
        } else {
            quantized.push(QuantizedHyGTModel::new(log2_n, rounds, angle_bits, codes, perm).map_err(invalid)?);
        }
    }
    expect_eof(r)?;
    let models = if angle_bits == 0 { BundleModels::Float(float) } else { BundleModels::Quantized(quantized) };
    ModelBundle::new(log2_n, precision_bits, models).map_err(|e| CliError::Format(e.to_string()))
}
