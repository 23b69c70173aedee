//! Tensor-level cost model: per-tile cycle costs, ping-pong load/compute
//! overlap, per-token totals, KV-attention streaming, design-space sweeps,
//! and price-efficiency conversion.

pub mod cost;
pub mod kv;
pub mod model;
pub mod prtsim;
pub mod run;
pub mod schedule;
pub mod sweep;

pub use cost::{group_build_cycles, tile_cost, tile_weight_bytes, TileCost, TILE_DIM};
pub use kv::{kv_layer_cycles, kv_per_token_cycles};
pub use model::ModelSpec;
pub use run::{run, LayerReport, RunOutcome};
pub use schedule::makespan;
pub use sweep::{argmin_nbw, sweep, ArgminCell, SweepRecord};

use crate::error::{Result, SimError};
use crate::lutgemv::entry_width;
use serde::Serialize;

/// Clock, fabric, capacity, and workload knobs of the cost model. The two
/// calibration constants the absolute numbers hang on are
/// `lookup_step_cycles` (row select + accumulator-width add) and
/// `dequant_cost` (CPU cycles per dequantized element).
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub core_clock_hz: f64,
    pub noc_bytes_per_cycle: f64,
    pub noc_clock_hz: f64,
    pub dram_bytes_per_sec: f64,
    pub llc_capacity_bytes: u64,
    pub llc_slices: u32,
    pub arrays: u32,
    pub array_rows: u32,
    pub batch: u32,
    pub nbw: u32,
    pub weight_bits: u32,
    pub act_bits: u32,
    /// Quantization group length along the reduction dimension.
    pub group_size: u32,
    /// Batch rows served per table generation before a rebuild round.
    pub batch_slots: u32,
    /// Cycles per lookup step: entry row select + 32-bit add.
    pub lookup_step_cycles: u64,
    /// CPU cycles per element for Step 5 dequantization.
    pub dequant_cost: u64,
    /// KV-cache element width in bits.
    pub kv_bits: u32,
    /// Monthly on-demand price used for tokens-per-dollar.
    pub monthly_price: f64,
    /// Model activation-pattern reuse with a pattern reuse table.
    pub prt: bool,
    /// Fraction of activation groups repeating an earlier batch row.
    pub prt_repeat_fraction: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            core_clock_hz: 3.0e9,
            noc_bytes_per_cycle: 32.0,
            noc_clock_hz: 2.0e9,
            dram_bytes_per_sec: 204.8e9,
            llc_capacity_bytes: 32 * 1024 * 1024,
            llc_slices: 32,
            arrays: 32,
            array_rows: 256,
            batch: 8,
            nbw: 2,
            weight_bits: 4,
            act_bits: 8,
            group_size: 32,
            batch_slots: 8,
            lookup_step_cycles: 34,
            dequant_cost: 1,
            kv_bits: 8,
            monthly_price: 665.45,
            prt: false,
            prt_repeat_fraction: 0.17,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("core_clock_hz", self.core_clock_hz),
            ("noc_bytes_per_cycle", self.noc_bytes_per_cycle),
            ("noc_clock_hz", self.noc_clock_hz),
            ("dram_bytes_per_sec", self.dram_bytes_per_sec),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.batch == 0 {
            return Err(SimError::InvalidConfig("batch must be at least 1".into()));
        }
        if !(1..=4).contains(&self.nbw) {
            return Err(SimError::InvalidNbw { nbw: self.nbw });
        }
        if !crate::quant::bit_width_supported(self.weight_bits) {
            return Err(SimError::UnsupportedBitWidth {
                bits: self.weight_bits,
            });
        }
        if !(1..=8).contains(&self.act_bits) {
            return Err(SimError::InvalidConfig(format!(
                "act_bits {} outside 1..=8",
                self.act_bits
            )));
        }
        if self.arrays == 0 || self.llc_slices == 0 {
            return Err(SimError::InvalidConfig("need at least one array/slice".into()));
        }
        if self.batch_slots == 0 {
            return Err(SimError::InvalidConfig("batch_slots must be positive".into()));
        }
        if self.group_size == 0 || !TILE_DIM.is_multiple_of(self.group_size as u64) {
            return Err(SimError::InvalidConfig(format!(
                "group_size {} must divide the tile dimension",
                self.group_size
            )));
        }
        if self.lookup_step_cycles == 0 {
            return Err(SimError::InvalidConfig("lookup_step_cycles must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.prt_repeat_fraction) {
            return Err(SimError::InvalidConfig(format!(
                "prt_repeat_fraction {} outside [0, 1]",
                self.prt_repeat_fraction
            )));
        }
        if self.kv_bits == 0 || self.kv_bits > 32 {
            return Err(SimError::InvalidConfig(format!(
                "kv_bits {} outside 1..=32",
                self.kv_bits
            )));
        }
        // The tile working set: table rows plus accumulator and float rows.
        let ew = entry_width(self.weight_bits, self.nbw);
        let needed = ((ew as usize) << self.nbw) + 64;
        if needed > self.array_rows as usize {
            return Err(SimError::LutCapacity {
                nbw: self.nbw,
                entry_width: ew,
                rows: self.array_rows as usize,
            });
        }
        Ok(())
    }

    /// Bytes entering the cluster per core cycle: the DRAM/NoC bottleneck.
    pub fn bytes_per_core_cycle(&self) -> f64 {
        let noc = self.noc_bytes_per_cycle * self.noc_clock_hz;
        self.dram_bytes_per_sec.min(noc) / self.core_clock_hz
    }
}

/// Unit conversion: token rate at a core clock.
pub fn tokens_per_second(cycles_per_token: f64, core_clock_hz: f64) -> f64 {
    core_clock_hz / cycles_per_token
}

/// Rate × seconds-per-30-days ÷ monthly price.
pub fn tokens_per_dollar(rate: f64, monthly_price: f64) -> Result<f64> {
    if !(monthly_price.is_finite() && monthly_price > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "monthly price {monthly_price} must be positive"
        )));
    }
    Ok(rate * 2_592_000.0 / monthly_price)
}
