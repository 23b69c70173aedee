//! Address-to-slice interleaving at 512-byte granularity. The low 9 bits
//! stay within a block; the remaining bits are XOR-folded bytewise so that
//! every byte of the block number steers the slice choice.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HasherConfig {
    pub num_slices: u32,
    pub block_bits: u32,
}

impl Default for HasherConfig {
    fn default() -> Self {
        Self {
            num_slices: 32,
            block_bits: 9,
        }
    }
}

/// Slice id for an address. Pure in the bits at and above block_bits.
pub fn hash_address(addr: u64, cfg: &HasherConfig) -> u32 {
    let block = addr >> cfg.block_bits;
    let mut h = block;
    h ^= block >> 8;
    h ^= block >> 16;
    h ^= block >> 24;
    h ^= block >> 32;
    h ^= block >> 40;
    h ^= block >> 48;
    h ^= block >> 56;
    (h as u32) % cfg.num_slices
}
