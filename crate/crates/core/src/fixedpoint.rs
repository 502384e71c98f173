//! Integer evaluation of HyGT models from small angle codes.
//!
//! Angles are quantized uniformly on `[0, 2π)` to `b`-bit codes. A shared
//! table maps each code to `p`-bit cosine/sine multipliers, so a model only
//! stores one code per butterfly. Negating an angle is `(2^b − code) mod 2^b`,
//! which keeps the inverse exactly representable.

use std::f64::consts::TAU;

use crate::error::{bail_arg, Error, Result};
use crate::transform::{check_permutation, hypercube_pair, num_parameters, HyGTModel};

pub const DEFAULT_ANGLE_BITS: u32 = 8;
pub const DEFAULT_PRECISION_BITS: u32 = 10;
/// Largest accepted input magnitude for the integer transforms.
pub const MAX_FIXED_INPUT: i64 = 1 << 20;

/// Shared sine/cosine multipliers indexed by angle code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrigTable {
    angle_bits: u32,
    precision_bits: u32,
    cos_entries: Vec<i32>,
    sin_entries: Vec<i32>,
}

pub fn build_trig_table(angle_bits: u32, precision_bits: u32) -> Result<TrigTable> {
    if !(1..=12).contains(&angle_bits) {
        bail_arg!("angle bits must be in 1..=12, got {angle_bits}");
    }
    if !(4..=15).contains(&precision_bits) {
        bail_arg!("precision bits must be in 4..=15, got {precision_bits}");
    }
    let size = 1usize << angle_bits;
    let scale = (1u32 << precision_bits) as f64;
    let (cos_entries, sin_entries) = (0..size)
        .map(|q| {
            let (s, c) = (TAU * q as f64 / size as f64).sin_cos();
            ((c * scale).round() as i32, (s * scale).round() as i32)
        })
        .unzip();
    Ok(TrigTable { angle_bits, precision_bits, cos_entries, sin_entries })
}

impl TrigTable {
    pub fn angle_bits(&self) -> u32 {
        self.angle_bits
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn cos_entries(&self) -> &[i32] {
        &self.cos_entries
    }

    pub fn sin_entries(&self) -> &[i32] {
        &self.sin_entries
    }

    #[inline]
    fn lookup(&self, code: u16) -> (i64, i64) {
        let q = code as usize;
        (self.cos_entries[q] as i64, self.sin_entries[q] as i64)
    }
}

/// A model whose angles are `b`-bit codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedHyGTModel {
    log2_n: u32,
    rounds: usize,
    angle_bits: u32,
    angle_codes: Vec<u16>,
    permutation: Option<Vec<usize>>,
}

impl QuantizedHyGTModel {
    pub fn new(
        log2_n: u32,
        rounds: usize,
        angle_bits: u32,
        angle_codes: Vec<u16>,
        permutation: Option<Vec<usize>>,
    ) -> Result<Self> {
        // Reuse the float model's shape checks.
        HyGTModel::identity(log2_n, rounds)?;
        if !(1..=12).contains(&angle_bits) {
            bail_arg!("angle bits must be in 1..=12, got {angle_bits}");
        }
        let expected = num_parameters(log2_n, rounds);
        if angle_codes.len() != expected {
            bail_arg!("expected {expected} angle codes, got {}", angle_codes.len());
        }
        if let Some(&bad) = angle_codes.iter().find(|&&c| (c as u32) >> angle_bits != 0) {
            return Err(Error::Invariant(format!("angle code {bad} does not fit in {angle_bits} bits")));
        }
        if let Some(perm) = &permutation {
            check_permutation(perm, 1 << log2_n)?;
        }
        Ok(Self { log2_n, rounds, angle_bits, angle_codes, permutation })
    }

    pub fn log2_n(&self) -> u32 {
        self.log2_n
    }

    pub fn dim(&self) -> usize {
        1 << self.log2_n
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn angle_bits(&self) -> u32 {
        self.angle_bits
    }

    pub fn angle_codes(&self) -> &[u16] {
        &self.angle_codes
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.permutation.as_deref()
    }

    /// Bytes needed for the codes at one byte per parameter (`b ≤ 8`), two otherwise.
    pub fn storage_bytes(&self) -> usize {
        self.angle_codes.len() * if self.angle_bits <= 8 { 1 } else { 2 }
    }

    /// Float model on the quantization grid: `θ̂ = 2π·code / 2^b`.
    pub fn dequantize(&self) -> HyGTModel {
        let size = (1u32 << self.angle_bits) as f64;
        let angles = self.angle_codes.iter().map(|&c| TAU * c as f64 / size).collect();
        HyGTModel::new(self.log2_n, self.rounds, angles, self.permutation.clone())
            .expect("quantized model shape was validated")
    }

    fn pass_count(&self) -> usize {
        self.rounds * self.log2_n as usize
    }
}

/// `code = round(θ/2π · 2^b) mod 2^b`.
pub fn quantize_angle(theta: f64, angle_bits: u32) -> u16 {
    let size = 1i64 << angle_bits;
    ((theta / TAU * size as f64).round() as i64).rem_euclid(size) as u16
}

pub fn quantize_model(model: &HyGTModel, angle_bits: u32) -> Result<QuantizedHyGTModel> {
    if !(1..=12).contains(&angle_bits) {
        bail_arg!("angle bits must be in 1..=12, got {angle_bits}");
    }
    let codes = model.angles().iter().map(|&t| quantize_angle(t, angle_bits)).collect();
    QuantizedHyGTModel::new(
        model.log2_n(),
        model.rounds(),
        angle_bits,
        codes,
        model.permutation().map(<[usize]>::to_vec),
    )
}

fn check_inputs(model: &QuantizedHyGTModel, table: &TrigTable, x: &[i64]) -> Result<()> {
    if table.angle_bits != model.angle_bits {
        bail_arg!(
            "table has {}-bit codes but model uses {}-bit codes",
            table.angle_bits,
            model.angle_bits
        );
    }
    if x.len() != model.dim() {
        bail_arg!("model dimension is {} but vector has length {}", model.dim(), x.len());
    }
    if let Some(v) = x.iter().find(|v| v.abs() > MAX_FIXED_INPUT) {
        bail_arg!("input magnitude {v} exceeds the fixed-point limit {MAX_FIXED_INPUT}");
    }
    Ok(())
}

#[inline]
fn fixed_butterfly(x: &mut [i64], m: usize, n: usize, c: i64, s: i64, shift: u32) -> Result<()> {
    let round = 1i64 << (shift - 1);
    let (a, b) = (x[m], x[n]);
    let overflow = || Error::Overflow(format!("butterfly ({m}, {n}) on inputs ({a}, {b})"));
    let ym = c
        .checked_mul(a)
        .zip(s.checked_mul(b))
        .and_then(|(p, q)| p.checked_add(q))
        .and_then(|v| v.checked_add(round))
        .ok_or_else(overflow)?;
    let yn = c
        .checked_mul(b)
        .zip(s.checked_mul(a))
        .and_then(|(p, q)| p.checked_sub(q))
        .and_then(|v| v.checked_add(round))
        .ok_or_else(overflow)?;
    x[m] = ym >> shift;
    x[n] = yn >> shift;
    Ok(())
}

fn run_pass(
    model: &QuantizedHyGTModel,
    table: &TrigTable,
    x: &mut [i64],
    global_pass: usize,
    negate: bool,
) -> Result<()> {
    let half = model.dim() / 2;
    let k = 1usize << (global_pass % model.log2_n as usize);
    let mask = (1u32 << model.angle_bits) - 1;
    let codes = &model.angle_codes[global_pass * half..(global_pass + 1) * half];
    for (j, &code) in codes.iter().enumerate() {
        let code = if negate { ((1u32 << model.angle_bits) - code as u32) & mask } else { code as u32 };
        let (c, s) = table.lookup(code as u16);
        let (m, n) = hypercube_pair(j, k);
        fixed_butterfly(x, m, n, c, s, table.precision_bits)?;
    }
    Ok(())
}

/// Integer forward transform. Each butterfly computes
/// `(c·x_m + s·x_n + 2^(p−1)) >> p` and `(−s·x_m + c·x_n + 2^(p−1)) >> p`.
pub fn forward_fixed(model: &QuantizedHyGTModel, table: &TrigTable, x: &[i64]) -> Result<Vec<i64>> {
    check_inputs(model, table, x)?;
    let mut y = x.to_vec();
    for p in 0..model.pass_count() {
        run_pass(model, table, &mut y, p, false)?;
    }
    if let Some(perm) = &model.permutation {
        y = perm.iter().map(|&src| y[src]).collect();
    }
    Ok(y)
}

/// Integer inverse: undo the permutation, then reversed passes with negated codes.
/// Rounding makes each butterfly only approximately orthogonal, so the
/// roundtrip is close to but not exactly the identity.
pub fn inverse_fixed(model: &QuantizedHyGTModel, table: &TrigTable, y: &[i64]) -> Result<Vec<i64>> {
    check_inputs(model, table, y)?;
    let mut x = y.to_vec();
    if let Some(perm) = &model.permutation {
        for (&dst, &v) in perm.iter().zip(y) {
            x[dst] = v;
        }
    }
    for p in (0..model.pass_count()).rev() {
        run_pass(model, table, &mut x, p, true)?;
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Klt,
    Hygt,
}

/// Storage in scalar units: `N²` per KLT matrix, one unit (byte) per HyGT
/// angle. The trig table is shared and not counted.
pub fn memory_footprint(kind: TransformKind, log2_n: u32, rounds: usize, num_transforms: usize) -> u64 {
    let per_transform = match kind {
        TransformKind::Klt => 1u64 << (2 * log2_n),
        TransformKind::Hygt => num_parameters(log2_n, rounds) as u64,
    };
    per_transform * num_transforms as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn table_entries() {
        let t = build_trig_table(8, 10).unwrap();
        assert_eq!((t.cos_entries()[0], t.sin_entries()[0]), (1024, 0));
        assert_eq!((t.cos_entries()[64], t.sin_entries()[64]), (0, 1024));
        assert_eq!(t.cos_entries()[32], 724);
        assert_eq!(t.cos_entries()[128], -1024);
    }

    #[test]
    fn table_width_checks() {
        assert!(build_trig_table(0, 10).is_err());
        assert!(build_trig_table(13, 10).is_err());
        assert!(build_trig_table(8, 3).is_err());
        assert!(build_trig_table(8, 16).is_err());
    }

    #[test]
    fn table_quarter_shift_symmetry() {
        for b in [2, 5, 8, 12] {
            let t = build_trig_table(b, 10).unwrap();
            let size = 1usize << b;
            let quarter = size / 4;
            for q in 0..size {
                assert_eq!(t.sin_entries()[q], t.cos_entries()[(q + size - quarter) % size], "b={b} q={q}");
            }
            let limit = 1i32 << 11;
            assert!(t.cos_entries().iter().chain(t.sin_entries()).all(|v| (-limit..limit).contains(v)));
        }
    }

    #[test]
    fn angle_codes() {
        assert_eq!(quantize_angle(0.0, 8), 0);
        assert_eq!(quantize_angle(FRAC_PI_2, 8), 64);
        assert_eq!(quantize_angle(-FRAC_PI_4, 8), 224);
        assert_eq!(quantize_angle(2.0 * PI, 8), 0);
    }

    #[test]
    fn quarter_turn_butterfly() {
        let t = build_trig_table(8, 10).unwrap();
        let q = QuantizedHyGTModel::new(1, 1, 8, vec![64], None).unwrap();
        let y = forward_fixed(&q, &t, &[100, 7]).unwrap();
        assert_eq!(y, vec![7, -100]);
        assert_eq!(inverse_fixed(&q, &t, &y).unwrap(), vec![100, 7]);
    }

    #[test]
    fn zero_codes_are_exact_identity() {
        let t = build_trig_table(8, 10).unwrap();
        let q = QuantizedHyGTModel::new(3, 2, 8, vec![0; 24], Some(vec![0, 1, 2, 3, 4, 5, 6, 7])).unwrap();
        let x: Vec<i64> = (0..8).map(|i| i * 37 - 100).collect();
        assert_eq!(forward_fixed(&q, &t, &x).unwrap(), x);
        assert_eq!(inverse_fixed(&q, &t, &x).unwrap(), x);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = build_trig_table(8, 10).unwrap();
        let q = QuantizedHyGTModel::new(1, 1, 8, vec![3], None).unwrap();
        assert!(forward_fixed(&q, &t, &[1, 2, 3]).is_err());
        assert!(forward_fixed(&q, &t, &[MAX_FIXED_INPUT + 1, 0]).is_err());
        let t6 = build_trig_table(6, 10).unwrap();
        assert!(forward_fixed(&q, &t6, &[1, 2]).is_err());
        assert!(matches!(QuantizedHyGTModel::new(1, 1, 8, vec![256], None), Err(Error::Invariant(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let mut x = [i64::MAX / 2, i64::MAX / 2];
        assert!(matches!(fixed_butterfly(&mut x, 0, 1, 1024, 0, 10), Err(Error::Overflow(_))));
    }

    #[test]
    fn rounding_floors_toward_negative_infinity_after_offset() {
        // cos(2π·1/8)·2^4 = 11.31 → 11; 11·(-3) + 8 = -25 → -25 >> 4 = -2.
        let t = build_trig_table(3, 4).unwrap();
        assert_eq!((t.cos_entries()[1], t.sin_entries()[1]), (11, 11));
        let q = QuantizedHyGTModel::new(1, 1, 3, vec![1], None).unwrap();
        assert_eq!(forward_fixed(&q, &t, &[-3, 0]).unwrap(), vec![-2, 2]);
    }

    #[test]
    fn footprints() {
        assert_eq!(memory_footprint(TransformKind::Klt, 2, 1, 1), 16);
        assert_eq!(memory_footprint(TransformKind::Klt, 4, 1, 105), 256 * 105);
        assert_eq!(memory_footprint(TransformKind::Hygt, 4, 2, 1), 64);
        assert_eq!(memory_footprint(TransformKind::Hygt, 6, 3, 2), 1152);
    }

    #[test]
    fn dequantize_roundtrip_codes() {
        let q = QuantizedHyGTModel::new(2, 1, 8, vec![0, 17, 128, 255], None).unwrap();
        let back = quantize_model(&q.dequantize(), 8).unwrap();
        assert_eq!(back, q);
        assert_eq!(q.storage_bytes(), 4);
    }
}
