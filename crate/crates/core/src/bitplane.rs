//! Word-parallel emulation of a compute-capable SRAM array.
//!
//! The grid is `rows` word lines by `cols` bit lines. An operand of width w
//! occupies w consecutive rows of one column, least significant bit at the
//! lowest row index, so a single row-level operation advances the same bit
//! position of every column at once. Each row is stored as a packed slab of
//! u64 words, one bit per column.
//!
//! Cycle accounting is formula-authoritative: charges come from the closed
//! form hardware costs (1 cycle per row op, n+1 per n-bit add, n^2+5n-2 per
//! n-bit multiply, w per w-bit transpose block), not from the number of
//! steps the emulator happens to take. The emulator separately counts the
//! row-granularity logic evaluations it actually performs (`logical_ops`) so
//! the charge model can be audited. The counting convention: every AND, OR,
//! XOR or NOT evaluated over row data costs one op, as does an explicit
//! `row_op` of any kind; wiring (renaming a plane), constant writes (row
//! clears, transposer writes) and column reads are free, since none of them
//! evaluates logic across a row.
//!
//! Columns can be masked out via the activity mask: stores leave inactive
//! columns untouched, which is how partial tiles keep their unused lanes
//! clean.

use crate::error::{Result, SimError};
use crate::ledger::{ChargeCategory, CycleLedger};

pub const DEFAULT_ROWS: usize = 256;
pub const DEFAULT_COLS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    And,
    Or,
    Xor,
    /// Unary; ignores the second source row.
    Not,
    /// Unary; ignores the second source row.
    Copy,
}

/// Cost of an n-bit ripple-carry addition.
pub fn add_cycles(n: usize) -> u64 {
    n as u64 + 1
}

/// Cost of an n-bit multiplication.
pub fn mult_cycles(n: usize) -> u64 {
    let n = n as u64;
    n * n + 5 * n - 2
}

/// One row register worth of working data, one bit per column. Constant
/// planes are tracked structurally so operations against them fold away
/// without charging audit ops (the fabric gates them off).
#[derive(Debug, Clone)]
pub(crate) enum Plane {
    Zero,
    Ones,
    Data(Vec<u64>),
}

impl Plane {
    fn is_zero(&self) -> bool {
        matches!(self, Plane::Zero)
    }
}

#[derive(Debug, Clone)]
pub struct BitPlaneArray {
    rows: usize,
    cols: usize,
    words: usize,
    planes: Vec<u64>,
    /// Active-column mask; bits beyond `cols` are always clear.
    mask: Vec<u64>,
    /// Valid-column mask (all columns); the activity mask is a subset.
    valid: Vec<u64>,
    cycles: u64,
    ledger: CycleLedger,
    logical_ops: u64,
    category: ChargeCategory,
}

impl BitPlaneArray {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 {
            return Err(SimError::RowOutOfRange { row: 0, rows });
        }
        if cols == 0 {
            return Err(SimError::ColumnOutOfRange { col: 0, cols });
        }
        let words = cols.div_ceil(64);
        let mut valid = vec![u64::MAX; words];
        let tail = cols % 64;
        if tail != 0 {
            valid[words - 1] = (1u64 << tail) - 1;
        }
        Ok(Self {
            rows,
            cols,
            words,
            planes: vec![0; rows * words],
            mask: valid.clone(),
            valid,
            cycles: 0,
            ledger: CycleLedger::new(),
            logical_ops: 0,
            category: ChargeCategory::Other,
        })
    }

    pub fn with_default_geometry() -> Self {
        Self::new(DEFAULT_ROWS, DEFAULT_COLS).expect("default geometry is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn logical_ops(&self) -> u64 {
        self.logical_ops
    }

    pub fn ledger(&self) -> &CycleLedger {
        &self.ledger
    }

    /// Route subsequent charges to `category`; returns the previous routing.
    pub fn set_charge_category(&mut self, category: ChargeCategory) -> ChargeCategory {
        std::mem::replace(&mut self.category, category)
    }

    pub fn set_activity_mask(&mut self, active: &[bool]) -> Result<()> {
        if active.len() != self.cols {
            return Err(SimError::GeometryMismatch {
                what: format!(
                    "activity mask of {} entries for {} columns",
                    active.len(),
                    self.cols
                ),
            });
        }
        for word in self.mask.iter_mut() {
            *word = 0;
        }
        for (col, &on) in active.iter().enumerate() {
            if on {
                self.mask[col / 64] |= 1u64 << (col % 64);
            }
        }
        Ok(())
    }

    pub fn activate_all(&mut self) {
        self.mask.copy_from_slice(&self.valid);
    }

    pub fn column_active(&self, col: usize) -> Result<bool> {
        self.check_col(col)?;
        Ok(self.mask[col / 64] >> (col % 64) & 1 == 1)
    }

    pub fn row_words(&self, row: usize) -> Result<&[u64]> {
        self.check_rows(row, 1)?;
        Ok(&self.planes[row * self.words..(row + 1) * self.words])
    }

    pub fn bit(&self, row: usize, col: usize) -> Result<bool> {
        self.check_rows(row, 1)?;
        self.check_col(col)?;
        Ok(self.planes[row * self.words + col / 64] >> (col % 64) & 1 == 1)
    }

    fn check_rows(&self, base: usize, len: usize) -> Result<()> {
        let end = base.checked_add(len).ok_or(SimError::RowOutOfRange {
            row: usize::MAX,
            rows: self.rows,
        })?;
        if end > self.rows {
            return Err(SimError::RowOutOfRange {
                row: end - 1,
                rows: self.rows,
            });
        }
        Ok(())
    }

    fn check_col(&self, col: usize) -> Result<()> {
        if col >= self.cols {
            return Err(SimError::ColumnOutOfRange {
                col,
                cols: self.cols,
            });
        }
        Ok(())
    }

    fn charge(&mut self, cycles: u64) {
        self.cycles += cycles;
        self.ledger.charge(self.category, cycles);
    }

    fn charge_to(&mut self, category: ChargeCategory, cycles: u64) {
        self.cycles += cycles;
        self.ledger.charge(category, cycles);
    }

    /// Fixed-function step (row select, latch drain) outside the logic-op
    /// set: charges cycles to the current category without an audit op.
    pub(crate) fn tick(&mut self, cycles: u64) {
        self.charge(cycles);
    }

    // ---- plane-level working registers -----------------------------------

    pub(crate) fn load_plane(&self, row: usize) -> Result<Plane> {
        self.check_rows(row, 1)?;
        Ok(Plane::Data(
            self.planes[row * self.words..(row + 1) * self.words].to_vec(),
        ))
    }

    /// Masked write of a working register into a grid row. Free: the write
    /// back is part of whichever logic evaluation produced the plane.
    pub(crate) fn store_plane(&mut self, row: usize, plane: &Plane) -> Result<()> {
        self.check_rows(row, 1)?;
        let base = row * self.words;
        for w in 0..self.words {
            let m = self.mask[w];
            let bits = match plane {
                Plane::Zero => 0,
                Plane::Ones => u64::MAX,
                Plane::Data(d) => d[w],
            };
            self.planes[base + w] = (self.planes[base + w] & !m) | (bits & m & self.valid[w]);
        }
        Ok(())
    }

    pub(crate) fn pl_and(&mut self, a: &Plane, b: &Plane) -> Plane {
        match (a, b) {
            (Plane::Zero, _) | (_, Plane::Zero) => Plane::Zero,
            (Plane::Ones, x) | (x, Plane::Ones) => x.clone(),
            (Plane::Data(x), Plane::Data(y)) => {
                self.logical_ops += 1;
                Plane::Data(x.iter().zip(y).map(|(p, q)| p & q).collect())
            }
        }
    }

    pub(crate) fn pl_or(&mut self, a: &Plane, b: &Plane) -> Plane {
        match (a, b) {
            (Plane::Ones, _) | (_, Plane::Ones) => Plane::Ones,
            (Plane::Zero, x) | (x, Plane::Zero) => x.clone(),
            (Plane::Data(x), Plane::Data(y)) => {
                self.logical_ops += 1;
                Plane::Data(x.iter().zip(y).map(|(p, q)| p | q).collect())
            }
        }
    }

    pub(crate) fn pl_xor(&mut self, a: &Plane, b: &Plane) -> Plane {
        match (a, b) {
            (Plane::Zero, x) | (x, Plane::Zero) => x.clone(),
            (Plane::Ones, x) | (x, Plane::Ones) => self.pl_not_inner(x),
            (Plane::Data(x), Plane::Data(y)) => {
                self.logical_ops += 1;
                Plane::Data(x.iter().zip(y).map(|(p, q)| p ^ q).collect())
            }
        }
    }

    pub(crate) fn pl_not(&mut self, a: &Plane) -> Plane {
        self.pl_not_inner(a)
    }

    fn pl_not_inner(&mut self, a: &Plane) -> Plane {
        match a {
            Plane::Zero => Plane::Ones,
            Plane::Ones => Plane::Zero,
            Plane::Data(x) => {
                self.logical_ops += 1;
                Plane::Data(x.iter().map(|p| !p).collect())
            }
        }
    }

    // ---- public operation set --------------------------------------------

    /// One row-parallel logic operation; NOT and COPY ignore `src_b`.
    /// Charges exactly 1 cycle.
    pub fn row_op(&mut self, op: RowOp, src_a: usize, src_b: usize, dst: usize) -> Result<()> {
        self.check_rows(src_a, 1)?;
        if matches!(op, RowOp::And | RowOp::Or | RowOp::Xor) {
            self.check_rows(src_b, 1)?;
        }
        self.check_rows(dst, 1)?;
        let a = self.load_plane(src_a)?;
        let out = match op {
            RowOp::And => {
                let b = self.load_plane(src_b)?;
                self.pl_and(&a, &b)
            }
            RowOp::Or => {
                let b = self.load_plane(src_b)?;
                self.pl_or(&a, &b)
            }
            RowOp::Xor => {
                let b = self.load_plane(src_b)?;
                self.pl_xor(&a, &b)
            }
            RowOp::Not => self.pl_not(&a),
            RowOp::Copy => a,
        };
        // Loaded planes are Data, so And/Or/Xor/Not counted one op above;
        // Copy is an explicit array operation and counts one by itself.
        if matches!(op, RowOp::Copy) {
            self.logical_ops += 1;
        }
        self.store_plane(dst, &out)?;
        self.charge(1);
        Ok(())
    }

    /// Transposer path: word i of `values` lands in column start_col+i,
    /// rows base_row..base_row+width, LSB lowest. Charges `width` cycles
    /// (one bit-plane write per cycle) to the transpose category.
    pub fn transpose_in(
        &mut self,
        values: &[u64],
        width: usize,
        base_row: usize,
        start_col: usize,
    ) -> Result<()> {
        if values.is_empty() {
            return Ok(());
        }
        if width == 0 || width > 64 {
            return Err(SimError::WidthOutOfRange {
                n: width,
                min: 1,
                max: 64,
            });
        }
        self.check_rows(base_row, width)?;
        let end_col = start_col
            .checked_add(values.len())
            .ok_or(SimError::ColumnOutOfRange {
                col: usize::MAX,
                cols: self.cols,
            })?;
        if end_col > self.cols {
            return Err(SimError::ColumnOutOfRange {
                col: end_col - 1,
                cols: self.cols,
            });
        }
        for bit in 0..width {
            let mut plane = vec![0u64; self.words];
            for (i, &v) in values.iter().enumerate() {
                if v >> bit & 1 == 1 {
                    let col = start_col + i;
                    plane[col / 64] |= 1u64 << (col % 64);
                }
            }
            let row = base_row + bit;
            let base = row * self.words;
            for (w, &bits) in plane.iter().enumerate() {
                // Only the columns named by the call are written, and only
                // where the activity mask allows.
                let m = self.mask[w] & span_mask(start_col, end_col, w);
                self.planes[base + w] = (self.planes[base + w] & !m) | (bits & m);
            }
        }
        self.charge_to(ChargeCategory::Transpose, width as u64);
        Ok(())
    }

    /// Free observer: assembles the vertical value at a column.
    pub fn read_column(&self, col: usize, base_row: usize, width: usize) -> Result<u64> {
        if width == 0 || width > 64 {
            return Err(SimError::WidthOutOfRange {
                n: width,
                min: 1,
                max: 64,
            });
        }
        self.check_col(col)?;
        self.check_rows(base_row, width)?;
        let mut out = 0u64;
        for bit in 0..width {
            if self.bit(base_row + bit, col)? {
                out |= 1u64 << bit;
            }
        }
        Ok(out)
    }

    /// Reset `n` rows to zero in active columns. Constant writes: charges
    /// n cycles (one row write each), no logic ops.
    pub fn clear_rows(&mut self, base: usize, n: usize) -> Result<()> {
        self.check_rows(base, n)?;
        for row in base..base + n {
            self.store_plane(row, &Plane::Zero)?;
        }
        self.charge(n as u64);
        Ok(())
    }

    fn load_operand(&self, base: usize, n: usize) -> Result<Vec<Plane>> {
        (0..n).map(|i| self.load_plane(base + i)).collect()
    }

    /// dst[0..=n] = a[0..n] + b[0..n] per column, unsigned, carry-out in
    /// row dst_base+n. Charges exactly n+1 cycles. Results are computed
    /// as-if atomically, so operand and destination rows may overlap.
    pub fn bitserial_add(&mut self, a_base: usize, b_base: usize, dst_base: usize, n: usize) -> Result<()> {
        self.add_inner(a_base, b_base, dst_base, n, true)
    }

    /// dst[0..n] = (a + b) mod 2^n: same ripple, carry-out discarded.
    /// Retires in the same n+1 cycles as the full add.
    pub fn bitserial_add_mod(&mut self, a_base: usize, b_base: usize, dst_base: usize, n: usize) -> Result<()> {
        self.add_inner(a_base, b_base, dst_base, n, false)
    }

    fn add_inner(
        &mut self,
        a_base: usize,
        b_base: usize,
        dst_base: usize,
        n: usize,
        keep_carry: bool,
    ) -> Result<()> {
        if n == 0 {
            return Err(SimError::WidthOutOfRange { n, min: 1, max: self.rows });
        }
        self.check_rows(a_base, n)?;
        self.check_rows(b_base, n)?;
        self.check_rows(dst_base, if keep_carry { n + 1 } else { n })?;
        let a = self.load_operand(a_base, n)?;
        let b = self.load_operand(b_base, n)?;
        let mut carry = Plane::Zero;
        let mut sums = Vec::with_capacity(n + 1);
        for i in 0..n {
            let axb = self.pl_xor(&a[i], &b[i]);
            let sum = self.pl_xor(&axb, &carry);
            let gen = self.pl_and(&a[i], &b[i]);
            let prop = self.pl_and(&axb, &carry);
            carry = self.pl_or(&gen, &prop);
            sums.push(sum);
        }
        if keep_carry {
            sums.push(carry);
        }
        for (i, s) in sums.iter().enumerate() {
            self.store_plane(dst_base + i, s)?;
        }
        self.charge(add_cycles(n));
        Ok(())
    }

    /// dst[0..2n] = a[0..n] * b[0..n] per column, unsigned. Charges exactly
    /// n^2 + 5n - 2 cycles. Operand/destination overlap is allowed.
    pub fn bitserial_mult(&mut self, a_base: usize, b_base: usize, dst_base: usize, n: usize) -> Result<()> {
        if n == 0 {
            return Err(SimError::WidthOutOfRange { n, min: 1, max: self.rows });
        }
        self.check_rows(a_base, n)?;
        self.check_rows(b_base, n)?;
        self.check_rows(dst_base, 2 * n)?;
        let a = self.load_operand(a_base, n)?;
        let b = self.load_operand(b_base, n)?;
        let mut acc: Vec<Plane> = (0..2 * n).map(|_| Plane::Zero).collect();
        for (i, bi) in b.iter().enumerate() {
            // Add the i-th partial product into acc[i..], rippling the carry
            // through the full remaining width.
            let mut carry = Plane::Zero;
            for j in 0..n {
                let pp = self.pl_and(&a[j], bi);
                let axb = self.pl_xor(&acc[i + j], &pp);
                let sum = self.pl_xor(&axb, &carry);
                let gen = self.pl_and(&acc[i + j], &pp);
                let prop = self.pl_and(&axb, &carry);
                carry = self.pl_or(&gen, &prop);
                acc[i + j] = sum;
            }
            let mut k = i + n;
            while !carry.is_zero() && k < 2 * n {
                let sum = self.pl_xor(&acc[k], &carry);
                carry = self.pl_and(&acc[k], &carry);
                acc[k] = sum;
                k += 1;
            }
        }
        for (i, p) in acc.iter().enumerate() {
            self.store_plane(dst_base + i, p)?;
        }
        self.charge(mult_cycles(n));
        Ok(())
    }

    /// dst[0..dst_width] += signext(src[0..src_width]) << shift, modulo
    /// 2^dst_width, per column. The fused shift network feeds the same
    /// ripple adder as a plain add at destination width, so the charge is
    /// dst_width + 1 cycles.
    pub fn bitserial_add_shifted(
        &mut self,
        src_base: usize,
        src_width: usize,
        shift: usize,
        dst_base: usize,
        dst_width: usize,
    ) -> Result<()> {
        if src_width == 0 {
            return Err(SimError::WidthOutOfRange { n: src_width, min: 1, max: self.rows });
        }
        if dst_width == 0 || shift >= dst_width {
            return Err(SimError::WidthOutOfRange { n: shift, min: 0, max: dst_width.saturating_sub(1) });
        }
        self.check_rows(src_base, src_width)?;
        self.check_rows(dst_base, dst_width)?;
        let src = self.load_operand(src_base, src_width)?;
        let dst = self.load_operand(dst_base, dst_width)?;
        let mut carry = Plane::Zero;
        let mut sums = Vec::with_capacity(dst_width);
        for p in 0..dst_width {
            if p < shift {
                // Operand bit is zero here; the carry chain is idle too.
                sums.push(dst[p].clone());
                continue;
            }
            let sbit = if p - shift < src_width {
                &src[p - shift]
            } else {
                &src[src_width - 1] // sign extension
            };
            let axb = self.pl_xor(&dst[p], sbit);
            let sum = self.pl_xor(&axb, &carry);
            let gen = self.pl_and(&dst[p], sbit);
            let prop = self.pl_and(&axb, &carry);
            carry = self.pl_or(&gen, &prop);
            sums.push(sum);
        }
        for (i, s) in sums.iter().enumerate() {
            self.store_plane(dst_base + i, s)?;
        }
        self.charge(add_cycles(dst_width));
        Ok(())
    }
}

fn span_mask(start_col: usize, end_col: usize, word: usize) -> u64 {
    let lo = word * 64;
    let hi = lo + 64;
    let s = start_col.max(lo);
    let e = end_col.min(hi);
    if s >= e {
        return 0;
    }
    let lead = s - lo;
    let len = e - s;
    if len == 64 {
        u64::MAX
    } else {
        ((1u64 << len) - 1) << lead
    }
}
