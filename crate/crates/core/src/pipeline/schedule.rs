//! Double-buffered tile pipeline: tile i+1 loads while tile i computes.

use crate::error::{Result, SimError};

/// Makespan of a load/compute pipeline over one tile sequence:
/// the first load, then each load racing the previous compute, then the
/// final compute draining out.
pub fn makespan(loads: &[f64], computes: &[f64]) -> f64 {
    assert_eq!(loads.len(), computes.len(), "one compute per load");
    let Some(&first) = loads.first() else {
        return 0.0;
    };
    let mut t = first;
    for i in 1..loads.len() {
        t += loads[i].max(computes[i - 1]);
    }
    t + computes[computes.len() - 1]
}

/// Schedule `tiles` identical tiles, checking the double-buffering
/// precondition that two in-flight tiles fit in the last-level cache.
pub fn tile_schedule(
    tiles: u64,
    load: f64,
    compute: f64,
    tile_bytes: u64,
    llc_capacity_bytes: u64,
) -> Result<f64> {
    if tile_bytes > llc_capacity_bytes / 2 {
        return Err(SimError::InvalidConfig(format!(
            "tile of {tile_bytes} bytes exceeds half the cache ({} bytes)",
            llc_capacity_bytes / 2
        )));
    }
    let loads = vec![load; tiles as usize];
    let computes = vec![compute; tiles as usize];
    Ok(makespan(&loads, &computes))
}
