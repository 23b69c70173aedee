//! Synthetic activation-pattern stream driving the pattern reuse table in
//! tensor-level runs. Batched decoding repeats group patterns across batch
//! rows (shared prompts, low-entropy activations); this plants repeats at
//! a configured rate and replays the stream through a real table, so hit
//! counts and saved cycles come from the table itself rather than from a
//! closed-form guess.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::prt::{PatternReuseTable, PrtStats};

use super::{PipelineConfig, TILE_DIM};

/// SplitMix64 finalizer: decorrelates structured tile coordinates.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn tile_rng(seed: u64, layer: u32, gemv: u32, tile: u64) -> ChaCha8Rng {
    let coord = ((layer as u64) << 40) ^ ((gemv as u64) << 32) ^ tile;
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(coord)))
}

/// Replay one tile's activation-group stream through a fresh reuse table.
/// Each group generation invalidates the table, matching the rebuild in
/// the kernel. Within a group, `prt_repeat_fraction` of the batch rows
/// (spread evenly across groups) reuse an earlier row's pattern; a batch
/// of one has no earlier row to repeat, so its stream is all misses.
pub fn tile_reuse_stats(cfg: &PipelineConfig, layer: u32, gemv: u32, tile: u64) -> PrtStats {
    let groups = TILE_DIM.div_ceil(cfg.nbw as u64);
    let batch = cfg.batch as u64;
    let key_bits = (cfg.nbw * cfg.act_bits).min(63);
    let mask = (1u64 << key_bits) - 1;
    let target = (cfg.prt_repeat_fraction * (groups * batch) as f64).round() as u64;
    // One lookup step survives on a hit (the probe); the rest are saved.
    let saved_per_hit = cfg.act_bits as u64 * cfg.lookup_step_cycles - 1;

    let mut rng = tile_rng(cfg.seed, layer, gemv, tile);
    let mut table: PatternReuseTable<()> = PatternReuseTable::new();
    let mut keys = Vec::with_capacity(batch as usize);
    for g in 0..groups {
        table.invalidate_generation();
        // Staircase quota: floor((g+1)·T/G) − floor(g·T/G) repeats this
        // group, capped at batch − 1 (the first row is always fresh).
        let quota = ((g + 1) * target / groups - g * target / groups).min(batch - 1);
        keys.clear();
        for _ in 0..batch - quota {
            keys.push(rng.random::<u64>() & mask);
        }
        for _ in 0..quota {
            let donor = rng.random_range(0..keys.len());
            keys.push(keys[donor]);
        }
        for &key in &keys {
            if table.lookup(key).is_some() {
                table.credit_saved_cycles(saved_per_hit);
            } else {
                table.insert(key, ());
            }
        }
    }
    *table.stats()
}
