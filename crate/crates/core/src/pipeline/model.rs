//! Transformer shapes driving the per-token cost roll-up.

use crate::error::{Result, SimError};
use serde::Serialize;

use super::TILE_DIM;

/// Decoder-only transformer dimensions. All matrix dimensions must be
/// multiples of the tile dimension so GEMVs decompose into whole tiles.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSpec {
    pub name: String,
    pub layers: u32,
    pub hidden: u32,
    pub ffn: u32,
    pub context_length: u32,
}

impl ModelSpec {
    /// Small shape for fast runs and tests: 24 layers, 1k hidden, 4k FFN.
    pub fn toy() -> Self {
        Self {
            name: "toy".into(),
            layers: 24,
            hidden: 1024,
            ffn: 4096,
            context_length: 4096,
        }
    }

    /// 7B-class decoder, FFN width rounded up to whole tiles.
    pub fn llama7b_like() -> Self {
        Self {
            name: "llama7b_like".into(),
            layers: 32,
            hidden: 4096,
            ffn: 11264,
            context_length: 4096,
        }
    }

    /// 13B-class decoder, FFN width rounded up to whole tiles.
    pub fn llama13b_like() -> Self {
        Self {
            name: "llama13b_like".into(),
            layers: 40,
            hidden: 5120,
            ffn: 14336,
            context_length: 4096,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "toy" => Ok(Self::toy()),
            "llama7b_like" => Ok(Self::llama7b_like()),
            "llama13b_like" => Ok(Self::llama13b_like()),
            other => Err(SimError::InvalidConfig(format!(
                "unknown model '{other}' (expected toy, llama7b_like, or llama13b_like)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(SimError::InvalidConfig("layers must be positive".into()));
        }
        for (name, dim) in [("hidden", self.hidden), ("ffn", self.ffn)] {
            if dim == 0 || !(dim as u64).is_multiple_of(TILE_DIM) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} dimension {dim} is not a positive multiple of {TILE_DIM}"
                )));
            }
        }
        if self.context_length == 0 {
            return Err(SimError::InvalidConfig("context_length must be positive".into()));
        }
        Ok(())
    }

    /// Weight GEMVs of one decoder layer as (k, n) pairs: four projections
    /// at the attention block (Q, K, V, O) and a two-matrix FFN.
    pub fn layer_gemvs(&self) -> Vec<(u32, u32)> {
        let h = self.hidden;
        let f = self.ffn;
        vec![(h, h), (h, h), (h, h), (h, h), (h, f), (h, f), (f, h)]
    }

    /// Whole 1024-wide tiles across one layer's weight GEMVs.
    pub fn tiles_per_layer(&self) -> u64 {
        self.layer_gemvs()
            .iter()
            .map(|&(k, n)| (k as u64 / TILE_DIM) * (n as u64 / TILE_DIM))
            .sum()
    }
}
