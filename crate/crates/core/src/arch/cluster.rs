//! Instruction execution over a cluster of bit-plane arrays plus the DFM
//! broadcast/aggregation fabric.
//!
//! Per-array row layout during a tile:
//!   [0, ew·2^nbw)      subset-sum table, entry m at rows [m·ew, (m+1)·ew)
//!   [+0, +32)          32-bit accumulator, two's complement
//!   [+32, +64)         float conversion destination
//!
//! Arrays run in lockstep: the outcome ledger carries one array's charges
//! (time, not energy) plus fabric-level costs, while logical-op audits are
//! summed across arrays.

use super::hasher::{hash_address, HasherConfig};
use super::isa::LutmmInstruction;
use super::mapping::{map_tile, MappingMode, Span};
use super::memory::SimMemory;
use crate::bitplane::{BitPlaneArray, Plane, RowOp};
use crate::error::{Result, SimError};
use crate::ledger::{ChargeCategory, CycleLedger};
use crate::lutgemv::{ceil_log2, entry_width};
use crate::typeconv;

/// Activation codes are full bytes.
pub const ACT_BITS: usize = 8;
const ACC_WIDTH: usize = 32;

/// Memory-to-fabric transfer: 64 bytes per fabric cycle at a 3:1 core to
/// fabric clock ratio.
pub fn load_cycles(bytes: usize) -> u64 {
    (bytes as u64 * 3).div_ceil(64)
}

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub arrays: usize,
    pub array_rows: usize,
    pub array_cols: usize,
    pub nbw: u32,
    pub mapping: MappingMode,
    /// Output columns per tile (1024 for the shipping instruction; smaller
    /// for reduced-geometry runs).
    pub tile_n: usize,
    /// Input rows per tile.
    pub tile_k: usize,
    /// CPU cycles per dequantized element in Step 5.
    pub dequant_cost: u64,
    /// true: one CPU round trip per tile; false: one per group iteration
    /// (charges only; the numeric path is identical).
    pub step5_per_tile: bool,
    pub hasher: HasherConfig,
    pub trace: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            arrays: 32,
            array_rows: 256,
            array_cols: 512,
            nbw: 2,
            mapping: MappingMode::RowSplit,
            tile_n: 1024,
            tile_k: 1024,
            dequant_cost: 1,
            step5_per_tile: true,
            hasher: HasherConfig::default(),
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    /// Dequantized tile result, one f32 per output column.
    pub results: Vec<f32>,
    pub ledger: CycleLedger,
    /// ⌈tile_k / nbw⌉, the Step 3/4 loop count.
    pub group_iterations: usize,
    /// Logic-op audit summed over all arrays.
    pub logical_ops: u64,
    /// Fetched 512-byte blocks per cache slice.
    pub slice_blocks: Vec<u64>,
    pub trace: Vec<String>,
}

#[derive(Debug)]
pub struct CSramCluster {
    config: ClusterConfig,
    regs: [u64; 32],
    arrays: Vec<BitPlaneArray>,
}

impl CSramCluster {
    pub fn new(config: ClusterConfig) -> Result<Self> {
        if config.arrays == 0 {
            return Err(SimError::GeometryMismatch {
                what: "cluster with zero arrays".into(),
            });
        }
        if !(1..=4).contains(&config.nbw) {
            return Err(SimError::InvalidNbw { nbw: config.nbw });
        }
        if config.tile_n == 0 || config.tile_k == 0 {
            return Err(SimError::GeometryMismatch {
                what: format!("degenerate tile {}x{}", config.tile_k, config.tile_n),
            });
        }
        match config.mapping {
            MappingMode::RowSplit => {
                // Leading arrays take the remainder; array 0 has the widest span.
                let widest = config.tile_n.div_ceil(config.arrays);
                if widest > config.array_cols {
                    return Err(SimError::GeometryMismatch {
                        what: format!(
                            "row-split span {widest} exceeds {} array columns",
                            config.array_cols
                        ),
                    });
                }
                if config.arrays > config.tile_n {
                    return Err(SimError::GeometryMismatch {
                        what: format!(
                            "{} arrays for {} output columns",
                            config.arrays, config.tile_n
                        ),
                    });
                }
            }
            MappingMode::ColumnSplit => {
                if config.tile_n > config.array_cols {
                    return Err(SimError::GeometryMismatch {
                        what: format!(
                            "column-split tile width {} exceeds {} array columns",
                            config.tile_n, config.array_cols
                        ),
                    });
                }
            }
        }
        Ok(Self {
            config,
            regs: [0; 32],
            arrays: Vec::new(),
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn set_register(&mut self, index: u8, value: u64) -> Result<()> {
        if index >= 32 {
            return Err(SimError::FieldOverflow {
                field: "register",
                value: index as u32,
                max: 31,
            });
        }
        self.regs[index as usize] = value;
        Ok(())
    }

    /// Row budget a tile at quantization level `ql` needs.
    fn layout(&self, ql: u32) -> Result<(usize, usize, usize)> {
        let ew = entry_width(ql, self.config.nbw) as usize;
        let lut_rows = ew << self.config.nbw;
        let acc_base = lut_rows;
        let float_base = acc_base + ACC_WIDTH;
        if float_base + ACC_WIDTH > self.config.array_rows {
            return Err(SimError::LutCapacity {
                nbw: self.config.nbw,
                entry_width: ew as u32,
                rows: self.config.array_rows,
            });
        }
        Ok((ew, acc_base, float_base))
    }

    /// Run one lutmm instruction: fetch the tile, build per-group tables,
    /// broadcast the input, look up and accumulate, aggregate, convert,
    /// dequantize, and write the result vector back.
    pub fn execute(&mut self, instr: &LutmmInstruction, memory: &mut SimMemory) -> Result<ExecOutcome> {
        instr.validate()?;
        let cfg = self.config.clone();
        let nbw = cfg.nbw as usize;
        let ql = instr.ql as usize;
        let (ew, acc_base, float_base) = self.layout(instr.ql)?;
        let groups_total = cfg.tile_k.div_ceil(nbw);
        let tile_start = instr.loc as usize * cfg.tile_n;
        let width_total = cfg.tile_n << instr.sc;
        let rw = self.regs[instr.rw as usize];
        let ri = self.regs[instr.ri as usize];
        let rd = self.regs[instr.rd as usize];

        let mut ledger = CycleLedger::new();
        let mut trace = Vec::new();
        let mut slice_blocks = vec![0u64; cfg.hasher.num_slices as usize];

        // Step 1: fetch the tile's weight codes and scales; blocks land in
        // slices per the address hash.
        let qmax = (1i32 << (ql - 1)) - 1;
        let mut weights = vec![0i32; cfg.tile_k * cfg.tile_n];
        for k in 0..cfg.tile_k {
            let row_addr = rw + (k * width_total + tile_start) as u64;
            let row = memory.read(row_addr, cfg.tile_n)?;
            for (c, &raw) in row.iter().enumerate() {
                let code = raw as i8 as i32;
                if code < -qmax || code > qmax {
                    return Err(SimError::CodeOutOfRange {
                        code: code as i64,
                        bits: instr.ql,
                    });
                }
                weights[k * cfg.tile_n + c] = code;
            }
            let first = row_addr >> cfg.hasher.block_bits;
            let last = (row_addr + cfg.tile_n as u64 - 1) >> cfg.hasher.block_bits;
            for block in first..=last {
                let slice = hash_address(block << cfg.hasher.block_bits, &cfg.hasher);
                slice_blocks[slice as usize] += 1;
            }
        }
        let scales_base = rw + (cfg.tile_k * width_total) as u64;
        let mut scales = vec![0f32; cfg.tile_n];
        for (c, s) in scales.iter_mut().enumerate() {
            *s = memory.read_f32_le(scales_base + ((tile_start + c) * 4) as u64)?;
        }
        let weight_bytes = cfg.tile_k * cfg.tile_n + cfg.tile_n * 4;
        ledger.charge(ChargeCategory::Load, load_cycles(weight_bytes));
        if cfg.trace {
            trace.push(format!(
                "step1: loc={} cols [{tile_start},{}) fetched {weight_bytes} bytes, {} blocks over {} slices",
                instr.loc,
                tile_start + cfg.tile_n,
                slice_blocks.iter().sum::<u64>(),
                slice_blocks.iter().filter(|&&b| b > 0).count(),
            ));
        }

        // Step 2: DFM reads the [1, tile_k] input vector.
        let acts: Vec<u32> = memory.read(ri, cfg.tile_k)?.iter().map(|&b| b as u32).collect();
        ledger.charge(ChargeCategory::Load, load_cycles(cfg.tile_k));
        if cfg.trace {
            trace.push(format!(
                "step2: broadcast {} input codes to {} arrays",
                acts.len(),
                cfg.arrays
            ));
        }

        let assignment = map_tile(cfg.tile_k, cfg.tile_n, cfg.arrays, cfg.mapping)?;
        self.arrays = (0..cfg.arrays)
            .map(|_| BitPlaneArray::new(cfg.array_rows, cfg.array_cols))
            .collect::<Result<_>>()?;
        for (a, arr) in self.arrays.iter_mut().enumerate() {
            let active_cols = match cfg.mapping {
                MappingMode::RowSplit => assignment.spans[a].len,
                MappingMode::ColumnSplit => cfg.tile_n,
            };
            let mut mask = vec![false; cfg.array_cols];
            mask[..active_cols].fill(true);
            arr.set_activity_mask(&mask)?;
            arr.set_charge_category(ChargeCategory::Other);
            arr.clear_rows(acc_base, ACC_WIDTH)?;
        }

        // Steps 3 and 4, looping ⌈tile_k/nbw⌉ times.
        match cfg.mapping {
            MappingMode::RowSplit => {
                for g in 0..groups_total {
                    for (a, arr) in self.arrays.iter_mut().enumerate() {
                        build_group_tables(
                            arr,
                            &weights,
                            cfg.tile_k,
                            cfg.tile_n,
                            g,
                            nbw,
                            ql,
                            ew,
                            assignment.spans[a],
                        )?;
                    }
                    let patterns = group_patterns(&acts, g, nbw, cfg.tile_k);
                    for arr in self.arrays.iter_mut() {
                        lookup_group(arr, &patterns, ew, acc_base)?;
                    }
                    if cfg.trace {
                        trace.push(format!("step3 g={g}: built {}-entry tables, ew={ew}", 1 << nbw));
                        trace.push(format!("step4 g={g}: {ACT_BITS} lookup steps, patterns={patterns:?}"));
                    }
                }
            }
            MappingMode::ColumnSplit => {
                // Split the group loop itself so no group straddles arrays.
                let group_spans = super::mapping::split_even(groups_total, cfg.arrays);
                let full = Span {
                    start: 0,
                    len: cfg.tile_n,
                };
                for (a, arr) in self.arrays.iter_mut().enumerate() {
                    let gs = group_spans[a];
                    for g in gs.start..gs.end() {
                        build_group_tables(
                            arr,
                            &weights,
                            cfg.tile_k,
                            cfg.tile_n,
                            g,
                            nbw,
                            ql,
                            ew,
                            full,
                        )?;
                        let patterns = group_patterns(&acts, g, nbw, cfg.tile_k);
                        lookup_group(arr, &patterns, ew, acc_base)?;
                        if cfg.trace {
                            trace.push(format!("step3 a={a} g={g}: built {}-entry tables", 1 << nbw));
                            trace.push(format!("step4 a={a} g={g}: {ACT_BITS} lookup steps"));
                        }
                    }
                }
            }
        }

        // Step 4 tail: partial sums cross the DFM adder tree. In row-split
        // mode this is collection latency; in column-split mode the tree
        // actually sums per-column partials into array 0.
        let tree_depth = ceil_log2(cfg.arrays as u32) as u64;
        ledger.charge(
            ChargeCategory::Aggregate,
            cfg.tile_n as u64 + tree_depth.saturating_sub(1),
        );
        if cfg.mapping == MappingMode::ColumnSplit {
            let mut merged = vec![0i32; cfg.tile_n];
            for (col, m) in merged.iter_mut().enumerate() {
                let mut sum = 0i64;
                for arr in &self.arrays {
                    sum += arr.read_column(col, acc_base, ACC_WIDTH)? as u32 as i32 as i64;
                }
                *m = i32::try_from(sum).map_err(|_| SimError::AccumulatorRange {
                    col,
                    needed: 64 - sum.unsigned_abs().leading_zeros(),
                    limit: 31,
                })?;
            }
            let words = cfg.array_cols.div_ceil(64);
            for r in 0..ACC_WIDTH {
                let mut plane = vec![0u64; words];
                for (col, &v) in merged.iter().enumerate() {
                    if v >> r & 1 == 1 {
                        plane[col / 64] |= 1 << (col % 64);
                    }
                }
                self.arrays[0].store_plane(acc_base + r, &Plane::Data(plane))?;
            }
        }
        if cfg.trace {
            trace.push(format!(
                "step4: aggregated {} columns through a depth-{tree_depth} adder tree",
                cfg.tile_n
            ));
        }

        // Step 5: in-array int→float, then CPU dequantization. The per-group
        // round-trip variant charges the conversion once per iteration.
        let rounds = if cfg.step5_per_tile {
            1
        } else {
            groups_total as u64
        };
        let convert_arrays = match cfg.mapping {
            MappingMode::RowSplit => self.arrays.len(),
            MappingMode::ColumnSplit => 1,
        };
        for a in 0..convert_arrays {
            let arr = &mut self.arrays[a];
            typeconv::twos_complement_to_sm(arr, acc_base, ACC_WIDTH)?;
            let active = match cfg.mapping {
                MappingMode::RowSplit => assignment.spans[a].len,
                MappingMode::ColumnSplit => cfg.tile_n,
            };
            // The converter takes a 25-bit sign-magnitude value: 24
            // magnitude bits plus sign. Anything wider cannot be converted
            // losslessly in this layout.
            for col in 0..active {
                let mag = arr.read_column(col, acc_base, ACC_WIDTH - 1)?;
                if mag >> 24 != 0 {
                    let global = match cfg.mapping {
                        MappingMode::RowSplit => assignment.spans[a].start + col,
                        MappingMode::ColumnSplit => col,
                    };
                    return Err(SimError::AccumulatorRange {
                        col: global,
                        needed: 64 - mag.leading_zeros(),
                        limit: 24,
                    });
                }
            }
            arr.set_charge_category(ChargeCategory::TypeConvert);
            arr.row_op(RowOp::Copy, acc_base + ACC_WIDTH - 1, 0, acc_base + 24)?;
            typeconv::int_to_float_inmem(arr, acc_base, 25, float_base)?;
        }
        if rounds > 1 {
            let per_round = typeconv::sm_prepass_cycles(ACC_WIDTH) + 1 + typeconv::int_to_float_cycles(25);
            ledger.charge(ChargeCategory::TypeConvert, (rounds - 1) * per_round);
        }

        let mut results = vec![0f32; cfg.tile_n];
        match cfg.mapping {
            MappingMode::RowSplit => {
                for (a, arr) in self.arrays.iter().enumerate() {
                    let span = assignment.spans[a];
                    for c in 0..span.len {
                        let bits = arr.read_column(c, float_base, 32)? as u32;
                        results[span.start + c] = f32::from_bits(bits) * scales[span.start + c];
                    }
                }
            }
            MappingMode::ColumnSplit => {
                for (c, out) in results.iter_mut().enumerate() {
                    let bits = self.arrays[0].read_column(c, float_base, 32)? as u32;
                    *out = f32::from_bits(bits) * scales[c];
                }
            }
        }
        ledger.charge(
            ChargeCategory::Other,
            rounds * cfg.tile_n as u64 * cfg.dequant_cost,
        );
        for (c, &v) in results.iter().enumerate() {
            memory.write_f32_le(rd + (c * 4) as u64, v)?;
        }
        ledger.charge(ChargeCategory::Load, load_cycles(cfg.tile_n * 4));
        if cfg.trace {
            trace.push(format!(
                "step5: converted and dequantized {} accumulators, wrote {} bytes",
                cfg.tile_n,
                cfg.tile_n * 4
            ));
        }

        // Lockstep time: one array's charges stand for the cluster; array 0
        // always runs the longest sequence (widest span, most groups, and
        // the conversion in column-split mode).
        ledger.merge(self.arrays[0].ledger());
        let logical_ops = self.arrays.iter().map(|a| a.logical_ops()).sum();

        Ok(ExecOutcome {
            results,
            ledger,
            group_iterations: groups_total,
            logical_ops,
            slice_blocks,
            trace,
        })
    }
}

/// Step 3 for one group: transpose the nbw basis codes in, sign-extend
/// them to entry width, clear the zero entry, then form composite entries
/// in ascending popcount order from previously built ones.
#[allow(clippy::too_many_arguments)]
fn build_group_tables(
    arr: &mut BitPlaneArray,
    weights: &[i32],
    tile_k: usize,
    tile_n: usize,
    g: usize,
    nbw: usize,
    ql: usize,
    ew: usize,
    cols: Span,
) -> Result<()> {
    let k0 = g * nbw;
    arr.set_charge_category(ChargeCategory::LutBuild);
    arr.clear_rows(0, ew)?;
    let code_mask = (1u64 << ql) - 1;
    let mut vals = vec![0u64; cols.len];
    for j in 0..nbw {
        let entry = 1usize << (nbw - 1 - j);
        let base = entry * ew;
        let k = k0 + j;
        if k < tile_k {
            for (i, v) in vals.iter_mut().enumerate() {
                *v = weights[k * tile_n + cols.start + i] as u64 & code_mask;
            }
        } else {
            vals.fill(0); // zero-padded tail group
        }
        arr.transpose_in(&vals, ql, base, 0)?;
        for r in base + ql..base + ew {
            arr.row_op(RowOp::Copy, base + ql - 1, 0, r)?;
        }
    }
    for m in 3..1usize << nbw {
        if m.is_power_of_two() {
            continue;
        }
        let rest = m & (m - 1);
        let low = m & m.wrapping_neg();
        arr.bitserial_add_mod(rest * ew, low * ew, m * ew, ew)?;
    }
    Ok(())
}

/// Activation bit patterns for one group, LSB plane first. Bit (nbw−1−j)
/// of a pattern selects basis weight j, matching the table convention.
fn group_patterns(acts: &[u32], g: usize, nbw: usize, tile_k: usize) -> Vec<u32> {
    let k0 = g * nbw;
    (0..ACT_BITS)
        .map(|t| {
            let mut m = 0u32;
            for j in 0..nbw {
                let k = k0 + j;
                if k < tile_k {
                    m |= (acts[k] >> t & 1) << (nbw - 1 - j);
                }
            }
            m
        })
        .collect()
}

/// Step 4 for one group: per activation bit plane, select the pattern's
/// entry row block and add it into the accumulator at the plane's shift.
fn lookup_group(arr: &mut BitPlaneArray, patterns: &[u32], ew: usize, acc_base: usize) -> Result<()> {
    arr.set_charge_category(ChargeCategory::LookupAccumulate);
    for (t, &m) in patterns.iter().enumerate() {
        arr.tick(1); // entry row select
        arr.bitserial_add_shifted(m as usize * ew, ew, t, acc_base, ACC_WIDTH)?;
    }
    Ok(())
}
