//! Cycle accounting shared by every simulation tier.
//!
//! Cycles are charged to one of a fixed set of categories so that reports
//! can attribute time (table construction vs. lookups vs. conversion and so
//! on). The ledger is plain data: adding to it never fails, and the total is
//! always the sum of the categories.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeCategory {
    /// Building subset-sum lookup tables (fetch, transpose-in, extend, adds).
    LutBuild,
    /// Table reads folded into running accumulators.
    LookupAccumulate,
    /// Integer-to-float conversion passes over accumulators.
    TypeConvert,
    /// Standalone transposer traffic outside of table builds.
    Transpose,
    /// Cross-array reduction and result collection.
    Aggregate,
    /// Streaming operands in from memory.
    Load,
    /// Everything else (scalar post-processing, bookkeeping).
    Other,
}

pub const ALL_CATEGORIES: [ChargeCategory; 7] = [
    ChargeCategory::LutBuild,
    ChargeCategory::LookupAccumulate,
    ChargeCategory::TypeConvert,
    ChargeCategory::Transpose,
    ChargeCategory::Aggregate,
    ChargeCategory::Load,
    ChargeCategory::Other,
];

impl ChargeCategory {
    pub fn name(self) -> &'static str {
        match self {
            ChargeCategory::LutBuild => "lut_build",
            ChargeCategory::LookupAccumulate => "lookup_accumulate",
            ChargeCategory::TypeConvert => "type_convert",
            ChargeCategory::Transpose => "transpose",
            ChargeCategory::Aggregate => "aggregate",
            ChargeCategory::Load => "load",
            ChargeCategory::Other => "other",
        }
    }
}

/// Per-category cycle counts for one run or one component of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleLedger {
    pub lut_build: u64,
    pub lookup_accumulate: u64,
    pub type_convert: u64,
    pub transpose: u64,
    pub aggregate: u64,
    pub load: u64,
    pub other: u64,
}

impl CycleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, category: ChargeCategory, cycles: u64) {
        *self.slot(category) += cycles;
    }

    pub fn discharge(&mut self, category: ChargeCategory, cycles: u64) {
        let slot = self.slot(category);
        debug_assert!(*slot >= cycles, "discharging more than was charged");
        *slot = slot.saturating_sub(cycles);
    }

    pub fn get(&self, category: ChargeCategory) -> u64 {
        match category {
            ChargeCategory::LutBuild => self.lut_build,
            ChargeCategory::LookupAccumulate => self.lookup_accumulate,
            ChargeCategory::TypeConvert => self.type_convert,
            ChargeCategory::Transpose => self.transpose,
            ChargeCategory::Aggregate => self.aggregate,
            ChargeCategory::Load => self.load,
            ChargeCategory::Other => self.other,
        }
    }

    fn slot(&mut self, category: ChargeCategory) -> &mut u64 {
        match category {
            ChargeCategory::LutBuild => &mut self.lut_build,
            ChargeCategory::LookupAccumulate => &mut self.lookup_accumulate,
            ChargeCategory::TypeConvert => &mut self.type_convert,
            ChargeCategory::Transpose => &mut self.transpose,
            ChargeCategory::Aggregate => &mut self.aggregate,
            ChargeCategory::Load => &mut self.load,
            ChargeCategory::Other => &mut self.other,
        }
    }

    pub fn total(&self) -> u64 {
        ALL_CATEGORIES.iter().map(|&c| self.get(c)).sum()
    }

    pub fn merge(&mut self, other: &CycleLedger) {
        for cat in ALL_CATEGORIES {
            self.charge(cat, other.get(cat));
        }
    }

    /// Scale every category by `num / den` in one pass, rounding the scaled
    /// total down at most once per category. Used to amortize costs that are
    /// shared across a batch.
    pub fn scaled(&self, num: u64, den: u64) -> CycleLedger {
        assert!(den != 0, "scale denominator must be nonzero");
        let mut out = CycleLedger::new();
        for cat in ALL_CATEGORIES {
            let scaled = (self.get(cat) as u128 * num as u128) / den as u128;
            out.charge(cat, u64::try_from(scaled).expect("scaled cycles overflow u64"));
        }
        out
    }
}
