//! Group-quantized tensors: symmetric signed weights, asymmetric unsigned
//! activations, tight little-endian code packing, and the SAILT fixture
//! format used by the CLI and tests.

use std::io::{Read, Write};

use crate::error::{Result, SimError};

pub const SUPPORTED_BIT_WIDTHS: [u32; 6] = [2, 3, 4, 5, 6, 8];
pub const DEFAULT_GROUP_SIZE: usize = 32;

pub fn bit_width_supported(bits: u32) -> bool {
    SUPPORTED_BIT_WIDTHS.contains(&bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    /// Signed symmetric codes in [−(2^(b−1)−1), 2^(b−1)−1], value = code × scale.
    WeightSymmetric,
    /// Unsigned codes in [0, 2^b−1], value = (code − zero_point) × scale.
    ActivationAsymmetric,
}

#[derive(Debug, Clone)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    bit_width: u32,
    group_size: usize,
    kind: TensorKind,
    /// Packed codes, row-major, little-endian bit order within bytes.
    codes: Vec<u8>,
    /// One scale per group; groups tile each row along its columns.
    scales: Vec<f32>,
    /// One zero point per group; empty for weight tensors.
    zero_points: Vec<u16>,
}

impl QuantizedTensor {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    pub fn packed_codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn groups_per_row(&self) -> usize {
        self.cols.div_ceil(self.group_size)
    }

    /// Decoded integer code at (row, col): signed for weights, unsigned
    /// for activations.
    pub fn code(&self, row: usize, col: usize) -> i32 {
        assert!(row < self.rows && col < self.cols, "index out of range");
        let idx = row * self.cols + col;
        let raw = unpack_one(&self.codes, self.bit_width, idx);
        match self.kind {
            TensorKind::WeightSymmetric => sign_extend(raw, self.bit_width),
            TensorKind::ActivationAsymmetric => raw as i32,
        }
    }

    /// All codes of one row, decoded.
    pub fn row_codes(&self, row: usize) -> Vec<i32> {
        (0..self.cols).map(|c| self.code(row, c)).collect()
    }

    pub fn scale_of(&self, row: usize, col: usize) -> f32 {
        self.scales[row * self.groups_per_row() + col / self.group_size]
    }

    pub fn zero_point_of(&self, row: usize, col: usize) -> u16 {
        match self.kind {
            TensorKind::WeightSymmetric => 0,
            TensorKind::ActivationAsymmetric => {
                self.zero_points[row * self.groups_per_row() + col / self.group_size]
            }
        }
    }

    pub fn dequantize(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let code = self.code(r, c) as f32;
                let zp = self.zero_point_of(r, c) as f32;
                out.push((code - zp) * self.scale_of(r, c));
            }
        }
        out
    }
}

fn sign_extend(raw: u32, bits: u32) -> i32 {
    ((raw as i32) << (32 - bits)) >> (32 - bits)
}

fn unpack_one(bytes: &[u8], bits: u32, idx: usize) -> u32 {
    let mut out = 0u32;
    let base = idx * bits as usize;
    for b in 0..bits as usize {
        let pos = base + b;
        if bytes[pos / 8] >> (pos % 8) & 1 == 1 {
            out |= 1 << b;
        }
    }
    out
}

/// Quantize a row-major matrix. Groups run along each row; a tail group is
/// simply shorter. Weight scales are max|v| / (2^(b−1)−1) with codes rounded
/// to nearest-even; activation groups get a min/max affine fit with an
/// integer zero point. All-constant groups fall back to scale 1.0 so scales
/// stay positive.
pub fn quantize(
    values: &[f32],
    rows: usize,
    cols: usize,
    bit_width: u32,
    group_size: usize,
    kind: TensorKind,
) -> Result<QuantizedTensor> {
    if !bit_width_supported(bit_width) {
        return Err(SimError::UnsupportedBitWidth { bits: bit_width });
    }
    if group_size == 0 {
        return Err(SimError::ZeroGroupSize);
    }
    if rows == 0 || cols == 0 || values.len() != rows * cols {
        return Err(SimError::GeometryMismatch {
            what: format!(
                "{} values for a {rows}x{cols} tensor",
                values.len()
            ),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NotFinite);
    }

    let groups_per_row = cols.div_ceil(group_size);
    let mut codes = vec![0i32; rows * cols];
    let mut scales = Vec::with_capacity(rows * groups_per_row);
    let mut zero_points = Vec::new();
    let qmax_sym = (1i64 << (bit_width - 1)) - 1;
    let qmax_asym = (1i64 << bit_width) - 1;

    for r in 0..rows {
        for g in 0..groups_per_row {
            let start = g * group_size;
            let end = (start + group_size).min(cols);
            let group = &values[r * cols + start..r * cols + end];
            match kind {
                TensorKind::WeightSymmetric => {
                    let amax = group.iter().fold(0f32, |m, v| m.max(v.abs()));
                    let scale = if amax == 0.0 { 1.0 } else { amax / qmax_sym as f32 };
                    scales.push(scale);
                    for (i, &v) in group.iter().enumerate() {
                        let q = (v / scale).round_ties_even() as i64;
                        codes[r * cols + start + i] =
                            q.clamp(-qmax_sym, qmax_sym) as i32;
                    }
                }
                TensorKind::ActivationAsymmetric => {
                    let lo = group.iter().cloned().fold(f32::INFINITY, f32::min);
                    let hi = group.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                    let scale = if hi > lo { (hi - lo) / qmax_asym as f32 } else { 1.0 };
                    let zp = (-lo / scale).round_ties_even().clamp(0.0, qmax_asym as f32) as i64;
                    scales.push(scale);
                    zero_points.push(zp as u16);
                    for (i, &v) in group.iter().enumerate() {
                        let q = (v / scale).round_ties_even() as i64 + zp;
                        codes[r * cols + start + i] = q.clamp(0, qmax_asym) as i32;
                    }
                }
            }
        }
    }

    let signed = matches!(kind, TensorKind::WeightSymmetric);
    let packed = pack_codes(&codes, bit_width, signed)?;
    Ok(QuantizedTensor {
        rows,
        cols,
        bit_width,
        group_size,
        kind,
        codes: packed,
        scales,
        zero_points,
    })
}

/// Construct a tensor directly from integer codes (test fixtures, synthetic
/// workloads). Code ranges are validated against the kind.
#[allow(clippy::too_many_arguments)]
pub fn from_codes(
    codes: &[i32],
    rows: usize,
    cols: usize,
    bit_width: u32,
    group_size: usize,
    kind: TensorKind,
    scales: Vec<f32>,
    zero_points: Vec<u16>,
) -> Result<QuantizedTensor> {
    if !bit_width_supported(bit_width) {
        return Err(SimError::UnsupportedBitWidth { bits: bit_width });
    }
    if group_size == 0 {
        return Err(SimError::ZeroGroupSize);
    }
    if codes.len() != rows * cols {
        return Err(SimError::GeometryMismatch {
            what: format!("{} codes for a {rows}x{cols} tensor", codes.len()),
        });
    }
    let groups = rows * cols.div_ceil(group_size);
    if scales.len() != groups {
        return Err(SimError::GeometryMismatch {
            what: format!("{} scales for {groups} groups", scales.len()),
        });
    }
    if scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(SimError::NotFinite);
    }
    match kind {
        TensorKind::WeightSymmetric => {
            if !zero_points.is_empty() {
                return Err(SimError::GeometryMismatch {
                    what: "zero points on a weight tensor".into(),
                });
            }
        }
        TensorKind::ActivationAsymmetric => {
            if zero_points.len() != groups {
                return Err(SimError::GeometryMismatch {
                    what: format!("{} zero points for {groups} groups", zero_points.len()),
                });
            }
        }
    }
    let signed = matches!(kind, TensorKind::WeightSymmetric);
    let packed = pack_codes(codes, bit_width, signed)?;
    Ok(QuantizedTensor {
        rows,
        cols,
        bit_width,
        group_size,
        kind,
        codes: packed,
        scales,
        zero_points,
    })
}

/// Tightly pack integer codes into bytes, little-endian bit order, codes
/// crossing byte boundaries as needed.
pub fn pack_codes(codes: &[i32], bit_width: u32, signed: bool) -> Result<Vec<u8>> {
    if !(1..=16).contains(&bit_width) {
        return Err(SimError::UnsupportedBitWidth { bits: bit_width });
    }
    let (lo, hi) = if signed {
        (-(1i64 << (bit_width - 1)), (1i64 << (bit_width - 1)) - 1)
    } else {
        (0, (1i64 << bit_width) - 1)
    };
    let total_bits = codes.len() * bit_width as usize;
    let mut bytes = vec![0u8; total_bits.div_ceil(8)];
    for (idx, &code) in codes.iter().enumerate() {
        if (code as i64) < lo || (code as i64) > hi {
            return Err(SimError::CodeOutOfRange {
                code: code as i64,
                bits: bit_width,
            });
        }
        let raw = code as u32 & ((1u32 << bit_width) - 1);
        let base = idx * bit_width as usize;
        for b in 0..bit_width as usize {
            if raw >> b & 1 == 1 {
                bytes[(base + b) / 8] |= 1 << ((base + b) % 8);
            }
        }
    }
    Ok(bytes)
}

/// Inverse of [`pack_codes`] for a known code count.
pub fn unpack_codes(bytes: &[u8], bit_width: u32, count: usize, signed: bool) -> Result<Vec<i32>> {
    if !(1..=16).contains(&bit_width) {
        return Err(SimError::UnsupportedBitWidth { bits: bit_width });
    }
    let need = (count * bit_width as usize).div_ceil(8);
    if bytes.len() < need {
        return Err(SimError::GeometryMismatch {
            what: format!("{} bytes for {count} codes of {bit_width} bits", bytes.len()),
        });
    }
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let raw = unpack_one(bytes, bit_width, idx);
        out.push(if signed {
            sign_extend(raw, bit_width)
        } else {
            raw as i32
        });
    }
    Ok(out)
}

const SAILT_MAGIC: &[u8; 6] = b"SAILT\0";
const SAILT_VERSION: u16 = 1;

/// Serialize a weight tensor to the SAILT fixture format: magic, u16
/// version, u8 bit width, u32 rows/cols/group size (all little-endian),
/// packed codes, then scales as little-endian f32. Activation tensors have
/// zero points, which the format does not carry, and are rejected.
pub fn write_sailt(tensor: &QuantizedTensor, mut w: impl Write) -> Result<()> {
    if tensor.kind != TensorKind::WeightSymmetric {
        return Err(SimError::MalformedFixture {
            what: "only weight tensors are serializable".into(),
        });
    }
    w.write_all(SAILT_MAGIC)?;
    w.write_all(&SAILT_VERSION.to_le_bytes())?;
    w.write_all(&[tensor.bit_width as u8])?;
    w.write_all(&(tensor.rows as u32).to_le_bytes())?;
    w.write_all(&(tensor.cols as u32).to_le_bytes())?;
    w.write_all(&(tensor.group_size as u32).to_le_bytes())?;
    w.write_all(&tensor.codes)?;
    for s in &tensor.scales {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_sailt(mut r: impl Read) -> Result<QuantizedTensor> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    parse_sailt(&buf)
}

fn parse_sailt(buf: &[u8]) -> Result<QuantizedTensor> {
    if buf.len() < 6 || &buf[..6] != SAILT_MAGIC {
        return Err(SimError::BadMagic);
    }
    let need_header = 6 + 2 + 1 + 12;
    if buf.len() < need_header {
        return Err(SimError::MalformedFixture {
            what: "truncated header".into(),
        });
    }
    let version = u16::from_le_bytes([buf[6], buf[7]]);
    if version != SAILT_VERSION {
        return Err(SimError::BadVersion { version });
    }
    let bit_width = buf[8] as u32;
    if !bit_width_supported(bit_width) {
        return Err(SimError::UnsupportedBitWidth { bits: bit_width });
    }
    let rd_u32 = |off: usize| u32::from_le_bytes(buf[off..off + 4].try_into().unwrap());
    let rows = rd_u32(9) as usize;
    let cols = rd_u32(13) as usize;
    let group_size = rd_u32(17) as usize;
    if rows == 0 || cols == 0 {
        return Err(SimError::MalformedFixture {
            what: "zero dimension".into(),
        });
    }
    if group_size == 0 {
        return Err(SimError::ZeroGroupSize);
    }
    let code_bytes = (rows * cols * bit_width as usize).div_ceil(8);
    let groups = rows * cols.div_ceil(group_size);
    let expected = need_header + code_bytes + groups * 4;
    if buf.len() < expected {
        return Err(SimError::MalformedFixture {
            what: format!("need {expected} bytes, have {}", buf.len()),
        });
    }
    if buf.len() > expected {
        return Err(SimError::MalformedFixture {
            what: format!("{} trailing bytes", buf.len() - expected),
        });
    }
    let codes = buf[need_header..need_header + code_bytes].to_vec();
    let mut scales = Vec::with_capacity(groups);
    for g in 0..groups {
        let off = need_header + code_bytes + g * 4;
        let s = f32::from_le_bytes(buf[off..off + 4].try_into().unwrap());
        if !s.is_finite() || s <= 0.0 {
            return Err(SimError::MalformedFixture {
                what: format!("scale {g} is {s}"),
            });
        }
        scales.push(s);
    }
    // Packed codes are validated range-free: every bit pattern is a legal
    // signed code at its width.
    Ok(QuantizedTensor {
        rows,
        cols,
        bit_width,
        group_size,
        kind: TensorKind::WeightSymmetric,
        codes,
        scales,
        zero_points: Vec::new(),
    })
}
