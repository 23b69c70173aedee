//! Attention KV streaming cost: score and value GEMVs read the cached
//! K/V matrices out of the slice arrays every generated token.

use crate::error::Result;
use crate::pipeline::{ModelSpec, PipelineConfig};

/// Bytes one array row operation moves per cycle when streaming a cached
/// operand column through the compute rows.
pub const SLICE_STREAM_BYTES: f64 = 64.0;

/// Cycles one layer spends streaming its K and V matrices for one token.
/// Both matrices are `context × hidden` at `kv_bits`, spread across every
/// array in the cluster.
pub fn kv_layer_cycles(context: u32, hidden: u32, cfg: &PipelineConfig) -> Result<f64> {
    cfg.validate()?;
    let bytes = context as f64 * hidden as f64 * 2.0 * cfg.kv_bits as f64 / 8.0;
    Ok(bytes / (cfg.arrays as f64 * SLICE_STREAM_BYTES))
}

/// Per-token KV cost across the whole model. Attention is per sequence,
/// so this scales with context length, not with batch.
pub fn kv_per_token_cycles(model: &ModelSpec, cfg: &PipelineConfig) -> Result<f64> {
    model.validate()?;
    Ok(model.layers as f64 * kv_layer_cycles(model.context_length, model.hidden, cfg)?)
}
