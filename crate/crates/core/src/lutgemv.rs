//! The LUT-GEMV kernel: subset-sum tables over NBW basis weights, indexed
//! by activation bit patterns LSB→MSB with shift-and-add accumulation.
//!
//! Index convention: bit (nbw−1) of a table index corresponds to the first
//! basis weight of the group, so pattern 0b100 retrieves W0 and 0b001
//! retrieves W2 for a 3-weight table. Activations are unsigned codes;
//! weight signedness is carried by the signed table entries.
//!
//! This tier is functional-with-ledger: results are exact integer GEMV
//! over codes, and cycles are charged per group build and per lookup step
//! without emulating bit planes (the arch tier does that).

use crate::error::{Result, SimError};
use crate::ledger::{ChargeCategory, CycleLedger};
use crate::prt::PatternReuseTable;

/// Default accumulator width for tile-sized reductions.
pub const ACC_BITS: u32 = 32;

pub fn ceil_log2(x: u32) -> u32 {
    assert!(x >= 1);
    32 - (x - 1).leading_zeros()
}

/// Largest weight width whose 2^nbw-entry table fits in `rows` array rows.
pub fn max_bit_width(rows: usize, nbw: u32) -> usize {
    rows >> nbw
}

/// Bits per table entry: subset sums of nbw signed b-bit codes need
/// b + ⌈log2 nbw⌉ + 1 bits.
pub fn entry_width(weight_bits: u32, nbw: u32) -> u32 {
    weight_bits + ceil_log2(nbw) + 1
}

/// Cycles to build one table generation: one bit-serial add per composite
/// entry (2^nbw − nbw − 1 of them), each at the width of its partial sum.
pub fn build_cycles(weight_bits: u32, nbw: u32) -> u64 {
    let mut total = 0u64;
    for m in 0..(1u32 << nbw) {
        let p = m.count_ones();
        if p >= 2 {
            let w = weight_bits + ceil_log2(p) + 1;
            total += w as u64 + 1;
        }
    }
    total
}

/// Cycles for one lookup step: a row select plus a bit-serial add at
/// accumulator width.
pub fn lookup_accumulate_cycles(acc_bits: u32) -> u64 {
    1 + acc_bits as u64 + 1
}

#[derive(Debug, Clone)]
pub struct LutTable {
    nbw: u32,
    weight_bits: u32,
    entry_width: u32,
    entries: Vec<i32>,
}

impl LutTable {
    /// All 2^nbw subset sums of `basis`, checked against the array capacity.
    pub fn build(basis: &[i32], weight_bits: u32, array_rows: usize) -> Result<Self> {
        let nbw = basis.len() as u32;
        if !(1..=4).contains(&nbw) {
            return Err(SimError::InvalidNbw { nbw });
        }
        if !crate::quant::bit_width_supported(weight_bits) {
            return Err(SimError::UnsupportedBitWidth { bits: weight_bits });
        }
        let qmax = (1i64 << (weight_bits - 1)) - 1;
        for &w in basis {
            if (w as i64) < -qmax || (w as i64) > qmax {
                return Err(SimError::CodeOutOfRange {
                    code: w as i64,
                    bits: weight_bits,
                });
            }
        }
        let ew = entry_width(weight_bits, nbw);
        if (ew as usize) << nbw > array_rows {
            return Err(SimError::LutCapacity {
                nbw,
                entry_width: ew,
                rows: array_rows,
            });
        }
        let mut entries = vec![0i32; 1 << nbw];
        for (m, slot) in entries.iter_mut().enumerate() {
            let mut sum = 0i32;
            for (j, &w) in basis.iter().enumerate() {
                if m >> (nbw as usize - 1 - j) & 1 == 1 {
                    sum += w;
                }
            }
            *slot = sum;
        }
        Ok(Self {
            nbw,
            weight_bits,
            entry_width: ew,
            entries,
        })
    }

    pub fn nbw(&self) -> u32 {
        self.nbw
    }

    pub fn entry_width(&self) -> u32 {
        self.entry_width
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    pub fn build_charge(&self) -> u64 {
        build_cycles(self.weight_bits, self.nbw)
    }

    pub fn lookup(&self, pattern: u32) -> Result<i32> {
        if pattern as usize >= self.entries.len() {
            return Err(SimError::PatternOutOfRange {
                pattern,
                nbw: self.nbw,
            });
        }
        Ok(self.entries[pattern as usize])
    }
}

/// One shift-and-add step: acc + (entries[pattern] << bit_pos).
pub fn lookup_accumulate(table: &LutTable, pattern: u32, bit_pos: u32, acc: i32) -> Result<i32> {
    if bit_pos >= 32 {
        return Err(SimError::WidthOutOfRange {
            n: bit_pos as usize,
            min: 0,
            max: 31,
        });
    }
    Ok(acc + (table.lookup(pattern)? << bit_pos))
}

#[derive(Debug, Clone)]
pub struct GemvJob {
    pub batch: usize,
    pub k: usize,
    pub n: usize,
    pub nbw: u32,
    pub weight_bits: u32,
    pub act_bits: u32,
    /// Capacity context for the table build (default array height).
    pub array_rows: usize,
    /// B×K unsigned activation codes, row-major.
    pub activations: Vec<u32>,
    /// K×N signed weight codes, row-major.
    pub weights: Vec<i32>,
}

impl GemvJob {
    pub fn groups(&self) -> usize {
        self.k.div_ceil(self.nbw as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.nbw) {
            return Err(SimError::InvalidNbw { nbw: self.nbw });
        }
        if !crate::quant::bit_width_supported(self.weight_bits) {
            return Err(SimError::UnsupportedBitWidth {
                bits: self.weight_bits,
            });
        }
        if self.batch == 0 || self.k == 0 || self.n == 0 {
            return Err(SimError::GeometryMismatch {
                what: format!("degenerate job {}x{}x{}", self.batch, self.k, self.n),
            });
        }
        if !(1..=8).contains(&self.act_bits) {
            return Err(SimError::WidthOutOfRange {
                n: self.act_bits as usize,
                min: 1,
                max: 8,
            });
        }
        if self.activations.len() != self.batch * self.k {
            return Err(SimError::GeometryMismatch {
                what: format!(
                    "{} activation codes for a {}x{} input",
                    self.activations.len(),
                    self.batch,
                    self.k
                ),
            });
        }
        if self.weights.len() != self.k * self.n {
            return Err(SimError::GeometryMismatch {
                what: format!(
                    "{} weight codes for a {}x{} matrix",
                    self.weights.len(),
                    self.k,
                    self.n
                ),
            });
        }
        let act_max = (1u32 << self.act_bits) - 1;
        if let Some(&bad) = self.activations.iter().find(|&&a| a > act_max) {
            return Err(SimError::CodeOutOfRange {
                code: bad as i64,
                bits: self.act_bits,
            });
        }
        let qmax = (1i64 << (self.weight_bits - 1)) - 1;
        if let Some(&bad) = self
            .weights
            .iter()
            .find(|&&w| (w as i64) < -qmax || (w as i64) > qmax)
        {
            return Err(SimError::CodeOutOfRange {
                code: bad as i64,
                bits: self.weight_bits,
            });
        }
        let ew = entry_width(self.weight_bits, self.nbw);
        if (ew as usize) << self.nbw > self.array_rows {
            return Err(SimError::LutCapacity {
                nbw: self.nbw,
                entry_width: ew,
                rows: self.array_rows,
            });
        }
        // Accumulators are 32-bit: reject jobs whose worst case could wrap.
        let bound = self.k as i64 * act_max as i64 * qmax;
        if bound > i32::MAX as i64 {
            return Err(SimError::AccumulatorRange {
                col: 0,
                needed: 64 - bound.leading_zeros(),
                limit: 31,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GemvOutcome {
    /// B×N integer accumulators, row-major.
    pub accumulators: Vec<i32>,
    pub ledger: CycleLedger,
    pub groups: usize,
}

/// Pack one activation group into a PRT key: code j in bits
/// [j·act_bits, (j+1)·act_bits). At most 32 bits for supported configs.
pub fn pack_group_key(codes: &[u32], act_bits: u32) -> u64 {
    let mut key = 0u64;
    for (j, &c) in codes.iter().enumerate() {
        key |= (c as u64) << (j as u32 * act_bits);
    }
    key
}

/// Exact integer GEMV over codes. Per group of nbw weight rows the
/// per-column tables are built once (one parallel build charge) and reused
/// across all batch rows; each batch row then costs act_bits lookup steps,
/// or a single merge cycle when the pattern reuse table hits.
pub fn gemv_tile(
    job: &GemvJob,
    mut prt: Option<&mut PatternReuseTable<Vec<i32>>>,
) -> Result<GemvOutcome> {
    job.validate()?;
    let nbw = job.nbw as usize;
    let groups = job.groups();
    let table_len = 1usize << nbw;
    let mut ledger = CycleLedger::new();
    let mut acc = vec![0i32; job.batch * job.n];
    // entries[col * table_len + m] = subset sum m of the group's column col.
    let mut entries = vec![0i32; job.n * table_len];
    let build_charge = build_cycles(job.weight_bits, job.nbw);
    let step = lookup_accumulate_cycles(ACC_BITS);
    let per_hit_saving = job.act_bits as u64 * step - 1;
    let mut patterns = vec![0u32; job.act_bits as usize];
    let mut group_codes = vec![0u32; nbw];

    for g in 0..groups {
        let k0 = g * nbw;
        let rows = nbw.min(job.k - k0);
        for col in 0..job.n {
            let t = &mut entries[col * table_len..(col + 1) * table_len];
            t[0] = 0;
            for m in 1..table_len {
                if m.is_power_of_two() {
                    let j = nbw - 1 - m.trailing_zeros() as usize;
                    // Rows past K act as zero-padded basis weights.
                    t[m] = if j < rows {
                        job.weights[(k0 + j) * job.n + col]
                    } else {
                        0
                    };
                } else {
                    t[m] = t[m & (m - 1)] + t[m & m.wrapping_neg()];
                }
            }
        }
        ledger.charge(ChargeCategory::LutBuild, build_charge);
        // A new table generation invalidates every cached partial sum.
        if let Some(prt) = prt.as_deref_mut() {
            prt.invalidate_generation();
        }

        for b in 0..job.batch {
            for (j, slot) in group_codes.iter_mut().enumerate() {
                *slot = if j < rows {
                    job.activations[b * job.k + k0 + j]
                } else {
                    0
                };
            }
            for (t, slot) in patterns.iter_mut().enumerate() {
                let mut m = 0u32;
                for (j, &code) in group_codes.iter().enumerate() {
                    m |= (code >> t & 1) << (nbw - 1 - j);
                }
                *slot = m;
            }

            let key = pack_group_key(&group_codes, job.act_bits);
            let acc_row = &mut acc[b * job.n..(b + 1) * job.n];
            let cached = prt
                .as_deref_mut()
                .and_then(|p| p.lookup(key).cloned().map(|v| (v, p)));
            match cached {
                Some((contrib, p)) => {
                    for (a, c) in acc_row.iter_mut().zip(&contrib) {
                        *a += c;
                    }
                    // The hit bypasses the lookup steps; only the merge
                    // through the adder tree is charged.
                    ledger.charge(ChargeCategory::LookupAccumulate, 1);
                    p.credit_saved_cycles(per_hit_saving);
                }
                None => {
                    let steps = job.act_bits as u64;
                    match prt.as_deref_mut() {
                        Some(p) => {
                            let mut contrib = vec![0i32; job.n];
                            for (col, c) in contrib.iter_mut().enumerate() {
                                let t = &entries[col * table_len..(col + 1) * table_len];
                                let mut sum = 0i32;
                                for (bit, &m) in patterns.iter().enumerate() {
                                    sum += t[m as usize] << bit;
                                }
                                *c = sum;
                            }
                            for (a, c) in acc_row.iter_mut().zip(&contrib) {
                                *a += c;
                            }
                            p.insert(key, contrib);
                        }
                        None => {
                            for (col, a) in acc_row.iter_mut().enumerate() {
                                let t = &entries[col * table_len..(col + 1) * table_len];
                                let mut sum = 0i32;
                                for (bit, &m) in patterns.iter().enumerate() {
                                    sum += t[m as usize] << bit;
                                }
                                *a += sum;
                            }
                        }
                    }
                    ledger.charge(ChargeCategory::LookupAccumulate, steps * step);
                }
            }
        }
    }

    Ok(GemvOutcome {
        accumulators: acc,
        ledger,
        groups,
    })
}

/// Table-construction share of a completed run's cycles.
pub fn lut_overhead_fraction(ledger: &CycleLedger) -> Result<f64> {
    let total = ledger.total();
    if total == 0 {
        return Err(SimError::EmptyLedger);
    }
    Ok(ledger.lut_build as f64 / total as f64)
}
