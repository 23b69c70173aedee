//! Fully-associative pattern reuse table: a 32-entry LRU cache keyed on
//! activation-group patterns, short-circuiting repeated lookup sequences
//! within one table generation.
//!
//! The key is the whole activation group — nbw codes of act_bits each,
//! at most 32 bits for supported configurations — stored alongside a
//! 32-bit FNV-1a tag. Tags speed up rejection; the full key is always
//! compared, so hash collisions are counted but can never corrupt a
//! result. Entries cache whatever the caller computes for a group (the
//! kernel stores per-column partial-sum contributions) and the whole
//! table is invalidated whenever the lookup table it shadows is rebuilt.

use serde::Serialize;

pub const PRT_CAPACITY: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PrtStats {
    pub hits: u64,
    pub misses: u64,
    pub insertions: u64,
    pub evictions: u64,
    pub tag_collisions: u64,
    pub invalidations: u64,
    /// Cycles the hits avoided, as credited by the caller.
    pub cycles_saved: u64,
}

impl PrtStats {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone)]
struct Slot<V> {
    tag: u32,
    key: u64,
    value: V,
    last_use: u64,
}

#[derive(Debug, Clone)]
pub struct PatternReuseTable<V> {
    slots: Vec<Slot<V>>,
    capacity: usize,
    clock: u64,
    stats: PrtStats,
}

impl<V> Default for PatternReuseTable<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> PatternReuseTable<V> {
    pub fn new() -> Self {
        Self::with_capacity(PRT_CAPACITY)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be nonzero");
        Self {
            slots: Vec::with_capacity(capacity),
            capacity,
            clock: 0,
            stats: PrtStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn stats(&self) -> &PrtStats {
        &self.stats
    }

    /// Full-key associative lookup; refreshes the LRU stamp on a hit.
    pub fn lookup(&mut self, key: u64) -> Option<&V> {
        let tag = fnv1a32(key);
        self.clock += 1;
        let mut found = None;
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.tag == tag {
                if slot.key == key {
                    found = Some(i);
                    break;
                }
                self.stats.tag_collisions += 1;
            }
        }
        match found {
            Some(i) => {
                self.stats.hits += 1;
                self.slots[i].last_use = self.clock;
                Some(&self.slots[i].value)
            }
            None => {
                self.stats.misses += 1;
                None
            }
        }
    }

    /// Insert or overwrite; evicts the least recently used entry when full.
    pub fn insert(&mut self, key: u64, value: V) {
        let tag = fnv1a32(key);
        self.clock += 1;
        if let Some(slot) = self.slots.iter_mut().find(|s| s.tag == tag && s.key == key) {
            slot.value = value;
            slot.last_use = self.clock;
            return;
        }
        if self.slots.len() == self.capacity {
            let lru = self
                .slots
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| s.last_use)
                .map(|(i, _)| i)
                .expect("nonempty at capacity");
            self.slots.swap_remove(lru);
            self.stats.evictions += 1;
        }
        self.slots.push(Slot {
            tag,
            key,
            value,
            last_use: self.clock,
        });
        self.stats.insertions += 1;
    }

    /// Drop every entry (the shadowed LUT was rebuilt); stats survive.
    pub fn invalidate_generation(&mut self) {
        self.slots.clear();
        self.stats.invalidations += 1;
    }

    /// Record cycles a hit bypassed; the accounting identity
    /// cycles(off) − cycles(on) = Σ credits is checked by callers.
    pub fn credit_saved_cycles(&mut self, cycles: u64) {
        self.stats.cycles_saved += cycles;
    }
}

/// FNV-1a over the key's 8 little-endian bytes.
pub fn fnv1a32(key: u64) -> u32 {
    let mut h: u32 = 0x811c9dc5;
    for byte in key.to_le_bytes() {
        h ^= byte as u32;
        h = h.wrapping_mul(0x01000193);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn just_inserted_key_hits() {
        let mut prt = PatternReuseTable::new();
        prt.insert(0xabcd, 7u32);
        assert_eq!(prt.lookup(0xabcd), Some(&7));
        assert_eq!(prt.stats().hits, 1);
    }

    #[test]
    fn first_ever_pattern_misses() {
        let mut prt: PatternReuseTable<u32> = PatternReuseTable::new();
        assert_eq!(prt.lookup(1), None);
        assert_eq!(prt.stats().misses, 1);
    }

    #[test]
    fn thirty_three_distinct_insertions_evict_once() {
        let mut prt = PatternReuseTable::new();
        for k in 0..33u64 {
            prt.insert(k, k);
        }
        assert_eq!(prt.stats().evictions, 1);
        assert_eq!(prt.len(), 32);
        // Key 0 was the LRU entry.
        assert_eq!(prt.lookup(0), None);
        assert_eq!(prt.lookup(32), Some(&32));
    }

    #[test]
    fn cyclic_stream_of_33_thrashes() {
        let mut prt = PatternReuseTable::new();
        for _ in 0..4 {
            for k in 0..33u64 {
                if prt.lookup(k).is_none() {
                    prt.insert(k, ());
                }
            }
        }
        assert_eq!(prt.stats().hits, 0);
    }

    #[test]
    fn reinsert_overwrites_without_eviction() {
        let mut prt = PatternReuseTable::new();
        for k in 0..32u64 {
            prt.insert(k, k);
        }
        prt.insert(5, 99);
        assert_eq!(prt.stats().evictions, 0);
        assert_eq!(prt.len(), 32);
        assert_eq!(prt.lookup(5), Some(&99));
    }

    #[test]
    fn invalidation_empties_but_keeps_stats() {
        let mut prt = PatternReuseTable::new();
        prt.insert(1, ());
        prt.lookup(1);
        let hits = prt.stats().hits;
        prt.invalidate_generation();
        assert!(prt.is_empty());
        assert_eq!(prt.stats().hits, hits);
        assert_eq!(prt.lookup(1), None);
        assert_eq!(prt.stats().invalidations, 1);
    }

    #[test]
    fn lru_keeps_recently_used() {
        let mut prt = PatternReuseTable::with_capacity(2);
        prt.insert(1, ());
        prt.insert(2, ());
        prt.lookup(1); // 2 becomes LRU
        prt.insert(3, ());
        assert!(prt.lookup(1).is_some());
        assert!(prt.lookup(2).is_none());
        assert!(prt.lookup(3).is_some());
    }

    #[test]
    fn working_set_at_capacity_hits_every_repeat() {
        let mut prt = PatternReuseTable::new();
        for pass in 0..3 {
            for k in 0..32u64 {
                let hit = prt.lookup(k).is_some();
                if !hit {
                    prt.insert(k, ());
                }
                assert_eq!(hit, pass > 0);
            }
        }
        assert_eq!(prt.stats().hits, 64);
    }

    #[test]
    fn fnv_tag_is_stable() {
        // FNV-1a over 8 zero bytes, computed independently; pinned to catch
        // accidental edits to the constants.
        assert_eq!(fnv1a32(0), 0x9be17165);
        assert_ne!(fnv1a32(1), fnv1a32(1 << 8));
    }
}
