//! In-memory parallel conversion of sign-magnitude integers to IEEE-754
//! single precision, running on [`BitPlaneArray`] working registers, plus
//! the two's-complement pre-pass and the scalar float→int direction.
//!
//! The conversion handles widths 2 ≤ n ≤ 25 so every magnitude fits a
//! 24-bit significand and the result is exact. Cycle charges are
//! formula-authoritative: ⌈3n²/2⌉ + 39(n−1) for the conversion and
//! 2(n+1)+1 for the pre-pass, both under the `type_convert` category. The
//! emulator's own logic-op count is reported by the array for audit.
//!
//! Internals, per column, all positions in parallel:
//! 1. scan the magnitude from the top for the leading one, filling a
//!    thermometer mask C (bits 0..=p set) and a nonzero flag D;
//! 2. popcount C into a 5-bit sum (= p+1) and widen to 8 bits while adding
//!    the constant 126, giving the biased exponent p+127;
//! 3. increment C in n bits (one-hot 2^(p+1)) and bit-reverse it over n
//!    bits, giving the alignment multiplier 2^(n−2−p) — the n-bit form is
//!    used because reversing over n−1 bits loses the p = n−2 edge case;
//! 4. multiply magnitude × multiplier through an AND/OR shift network,
//!    aligning the leading one to bit n−2, and copy the fraction bits into
//!    the mantissa field;
//! 5. AND the sign and exponent with D so a zero input forces +0.0.

use crate::bitplane::{BitPlaneArray, Plane};
use crate::error::{Result, SimError};
use crate::ledger::ChargeCategory;

pub const MIN_WIDTH: usize = 2;
pub const MAX_WIDTH: usize = 25;

/// Conversion cost: ⌈3n²/2⌉ + 39(n−1).
pub fn int_to_float_cycles(n: usize) -> u64 {
    ((3 * n * n).div_ceil(2) + 39 * (n - 1)) as u64
}

/// Two's-complement → sign-magnitude pre-pass cost: 2(n+1)+1.
pub fn sm_prepass_cycles(n: usize) -> u64 {
    2 * (n as u64 + 1) + 1
}

/// In-place two's-complement → sign-magnitude over rows
/// [src_base, src_base+n), sign staying in the top row. The value −2^(n−1)
/// has no (n−1)-bit magnitude and saturates to −(2^(n−1)−1); the returned
/// vector flags which columns saturated.
pub fn twos_complement_to_sm(
    arr: &mut BitPlaneArray,
    src_base: usize,
    n: usize,
) -> Result<Vec<bool>> {
    if n < 2 {
        return Err(SimError::WidthOutOfRange {
            n,
            min: 2,
            max: arr.rows(),
        });
    }
    let prev = arr.set_charge_category(ChargeCategory::TypeConvert);
    let result = sm_inner(arr, src_base, n);
    arr.set_charge_category(prev);
    result
}

fn sm_inner(arr: &mut BitPlaneArray, src_base: usize, n: usize) -> Result<Vec<bool>> {
    let sign = arr.load_plane(src_base + n - 1)?;
    let mut mag = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let a = arr.load_plane(src_base + i)?;
        mag.push(arr.pl_xor(&a, &sign));
    }
    // Conditionally add 1: +s ripples from the LSB.
    let mut carry = sign.clone();
    for m in mag.iter_mut() {
        let sum = arr.pl_xor(m, &carry);
        carry = arr.pl_and(m, &carry);
        *m = sum;
    }
    // Carry out of the magnitude means the input was −2^(n−1): saturate.
    let overflow = carry;
    for m in mag.iter_mut() {
        *m = arr.pl_or(m, &overflow);
    }
    for (i, m) in mag.iter().enumerate() {
        arr.store_plane(src_base + i, m)?;
    }
    arr.tick(sm_prepass_cycles(n));
    let flags = plane_to_bools(arr, &overflow);
    Ok(flags)
}

fn plane_to_bools(arr: &BitPlaneArray, plane: &Plane) -> Vec<bool> {
    let cols = arr.cols();
    match plane {
        Plane::Zero => vec![false; cols],
        Plane::Ones => vec![true; cols],
        Plane::Data(words) => (0..cols).map(|c| words[c / 64] >> (c % 64) & 1 == 1).collect(),
    }
}

/// Convert the n-bit sign-magnitude integer at [src_base, src_base+n) of
/// every active column into IEEE-754 single-precision bits across the 32
/// rows at dst_base (LSB lowest, sign in the top row).
pub fn int_to_float_inmem(
    arr: &mut BitPlaneArray,
    src_base: usize,
    n: usize,
    dst_base: usize,
) -> Result<()> {
    if !(MIN_WIDTH..=MAX_WIDTH).contains(&n) {
        return Err(SimError::WidthOutOfRange {
            n,
            min: MIN_WIDTH,
            max: MAX_WIDTH,
        });
    }
    let src_end = src_base + n;
    let dst_end = dst_base + 32;
    if src_end > arr.rows() {
        return Err(SimError::RowOutOfRange {
            row: src_end - 1,
            rows: arr.rows(),
        });
    }
    if dst_end > arr.rows() {
        return Err(SimError::RowOutOfRange {
            row: dst_end - 1,
            rows: arr.rows(),
        });
    }
    if src_base < dst_end && dst_base < src_end {
        return Err(SimError::RegionOverlap {
            a_base: src_base,
            a_len: n,
            b_base: dst_base,
            b_len: 32,
        });
    }
    let prev = arr.set_charge_category(ChargeCategory::TypeConvert);
    let result = convert_inner(arr, src_base, n, dst_base);
    arr.set_charge_category(prev);
    result
}

fn convert_inner(arr: &mut BitPlaneArray, src_base: usize, n: usize, dst_base: usize) -> Result<()> {
    let sign_in = arr.load_plane(src_base + n - 1)?;
    let mut mag = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        mag.push(arr.load_plane(src_base + i)?);
    }

    // Leading-one thermometer scan, top down: c[i] = (leading one at ≥ i).
    let mut c: Vec<Plane> = vec![Plane::Zero; n - 1];
    let mut d = Plane::Zero;
    for i in (0..n - 1).rev() {
        d = arr.pl_or(&d, &mag[i]);
        c[i] = d.clone();
    }

    // Popcount of C into 5 bits: Sum = p+1 ≤ 24.
    let mut s: Vec<Plane> = vec![Plane::Zero; 5];
    for ci in &c {
        let mut carry = ci.clone();
        for sj in s.iter_mut() {
            let t = arr.pl_and(sj, &carry);
            *sj = arr.pl_xor(sj, &carry);
            carry = t;
        }
    }

    // Widen to 8 bits and add the constant 126: exponent = p+127.
    let mut e: Vec<Plane> = vec![Plane::Zero; 8];
    e[..5].clone_from_slice(&s);
    let mut carry = Plane::Zero;
    for (j, ej) in e.iter_mut().enumerate() {
        if 126 >> j & 1 == 1 {
            let axc = arr.pl_xor(ej, &carry);
            let sum = arr.pl_not(&axc);
            carry = arr.pl_or(ej, &carry);
            *ej = sum;
        } else {
            let sum = arr.pl_xor(ej, &carry);
            carry = arr.pl_and(ej, &carry);
            *ej = sum;
        }
    }

    // Zero inputs force +0.0: gate sign and exponent with D.
    let sign_out = arr.pl_and(&sign_in, &d);
    for ej in e.iter_mut() {
        *ej = arr.pl_and(ej, &d);
    }

    // Alignment multiplier: reverse(C+1) over n bits = one-hot 2^(n−2−p).
    let mut cp: Vec<Plane> = Vec::with_capacity(n);
    let mut carry = Plane::Ones;
    for ci in &c {
        cp.push(arr.pl_xor(ci, &carry));
        carry = arr.pl_and(ci, &carry);
    }
    cp.push(carry);
    let mul: Vec<Plane> = cp.into_iter().rev().collect();

    // prod[t] = OR_{j+k=t} mag[j] AND mul[k]: the fraction bits of the
    // aligned significand. Bit n−2 is the implicit leading one; only
    // t < n−2 are kept.
    let mut prod: Vec<Plane> = Vec::with_capacity(n.saturating_sub(2));
    for t in 0..n.saturating_sub(2) {
        let mut acc = Plane::Zero;
        for (k, mk) in mul.iter().enumerate().take(t.min(n - 1) + 1) {
            let j = t - k;
            if j > n - 2 {
                continue;
            }
            let term = arr.pl_and(&mag[j], mk);
            acc = arr.pl_or(&acc, &term);
        }
        prod.push(acc);
    }

    // Assemble: mantissa below row 23, exponent at 23..31, sign at 31.
    for u in 0..23 {
        arr.store_plane(dst_base + u, &Plane::Zero)?;
    }
    for (i, p) in prod.iter().enumerate() {
        arr.store_plane(dst_base + 25 - n + i, p)?;
    }
    for (j, ej) in e.iter().enumerate() {
        arr.store_plane(dst_base + 23 + j, ej)?;
    }
    arr.store_plane(dst_base + 31, &sign_out)?;

    arr.tick(int_to_float_cycles(n));
    Ok(())
}

/// Scalar float → n-bit signed integer: truncation toward zero, saturating
/// to the representable range. NaN and infinities are rejected.
pub fn float_to_int(value: f32, n: u32) -> Result<i64> {
    if !(2..=32).contains(&n) {
        return Err(SimError::WidthOutOfRange {
            n: n as usize,
            min: 2,
            max: 32,
        });
    }
    if !value.is_finite() {
        return Err(SimError::NotFinite);
    }
    let hi = (1i64 << (n - 1)) - 1;
    let lo = -(1i64 << (n - 1));
    let t = value.trunc() as f64;
    if t >= hi as f64 {
        return Ok(hi);
    }
    if t <= lo as f64 {
        return Ok(lo);
    }
    Ok(t as i64)
}
