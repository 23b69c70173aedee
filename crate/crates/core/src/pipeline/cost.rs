//! Per-tile cycle costs: table construction, lookup streaming, conversion,
//! aggregation, dequantization, and the weight-load transfer they overlap.

use crate::error::Result;
use crate::ledger::{ChargeCategory, CycleLedger};
use crate::lutgemv::{build_cycles, ceil_log2, entry_width};
use crate::typeconv::{int_to_float_cycles, sm_prepass_cycles, MAX_WIDTH};

use super::PipelineConfig;

/// Weight tiles are square with this edge, matching the instruction set's
/// fixed 1024-column result span.
pub const TILE_DIM: u64 = 1024;

/// Cycles to erect one group's tables across the column dimension. The
/// arrays work in lockstep, so this is the longest per-array sequence:
/// fetch the basis weight rows, transpose them in, sign-extend to entry
/// width, clear the zero entry, materialize composite entries with
/// bit-serial adds, and drain the previous generation's batch slot.
pub fn group_build_cycles(nbw: u32, weight_bits: u32) -> u64 {
    let ew = entry_width(weight_bits, nbw) as u64;
    let b = weight_bits as u64;
    let n = nbw as u64;
    let fetch = n * b;
    let transpose = n * ew;
    let sign_extend = n * (ew - b);
    let zero_entry = ew;
    let composite_adds = build_cycles(weight_bits, nbw);
    let slot_drain = 33;
    fetch + transpose + sign_extend + zero_entry + composite_adds + slot_drain
}

/// Table generations needed to serve the whole batch: the accumulator
/// region holds `batch_slots` concurrent rows, and a batch larger than
/// that streams through in fractional rounds of the build cost.
pub fn rebuild_rounds(batch: u32, batch_slots: u32) -> f64 {
    (batch as f64 / batch_slots as f64).max(1.0)
}

/// Bytes fetched per tile: packed weight codes plus per-group f32 scales.
pub fn tile_weight_bytes(cfg: &PipelineConfig) -> u64 {
    let code_bytes = TILE_DIM * TILE_DIM * cfg.weight_bits as u64 / 8;
    let scale_bytes = TILE_DIM * (TILE_DIM / cfg.group_size as u64) * 4;
    code_bytes + scale_bytes
}

/// One tile's position in the load/compute pipeline, plus its full work
/// breakdown. `load` and `compute` are the critical-path quantities the
/// schedule overlaps; the ledger additionally carries work that runs off
/// the critical path (aggregation drains, CPU dequantization, the load
/// itself).
#[derive(Debug, Clone, Copy)]
pub struct TileCost {
    pub load: f64,
    pub compute: f64,
    pub ledger: CycleLedger,
}

pub fn tile_cost(cfg: &PipelineConfig) -> Result<TileCost> {
    cfg.validate()?;
    let groups = TILE_DIM.div_ceil(cfg.nbw as u64);
    let batch = cfg.batch as u64;
    let bg = group_build_cycles(cfg.nbw, cfg.weight_bits);
    let rounds = rebuild_rounds(cfg.batch, cfg.batch_slots);

    let build = groups as f64 * bg as f64 * rounds;
    // Integer ledger charge, floored once over the whole tile.
    let build_ledgered = (groups as u128 * bg as u128 * batch.max(cfg.batch_slots as u64) as u128
        / cfg.batch_slots as u128) as u64;
    let lookup = groups * batch * cfg.act_bits as u64 * cfg.lookup_step_cycles;
    // Each batch row converts once per tile: sign-magnitude pre-pass,
    // magnitude range check, then the in-memory integer-to-float routine.
    let convert = batch * (sm_prepass_cycles(32) + 1 + int_to_float_cycles(MAX_WIDTH));
    // Tree reduction across arrays drains one value per cycle once full.
    let aggregate = batch * (TILE_DIM - 1 + ceil_log2(cfg.arrays).max(1) as u64);
    let dequant = batch * TILE_DIM * cfg.dequant_cost;

    let load = tile_weight_bytes(cfg) as f64 / cfg.bytes_per_core_cycle();

    let mut ledger = CycleLedger::new();
    ledger.charge(ChargeCategory::LutBuild, build_ledgered);
    ledger.charge(ChargeCategory::LookupAccumulate, lookup);
    ledger.charge(ChargeCategory::TypeConvert, convert);
    ledger.charge(ChargeCategory::Aggregate, aggregate);
    ledger.charge(ChargeCategory::Load, load.round() as u64);
    ledger.charge(ChargeCategory::Other, dequant);

    Ok(TileCost {
        load,
        compute: build + (lookup + convert) as f64,
        ledger,
    })
}
