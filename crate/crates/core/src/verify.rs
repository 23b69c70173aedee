//! Verification campaigns behind the check subcommands: the lookup-table
//! GEMV kernel against a triple-loop integer oracle, and the in-memory
//! type converter against direct float casts. Both produce serializable
//! reports carrying every seed needed to replay a failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bitplane::BitPlaneArray;
use crate::error::Result;
use crate::ledger::ChargeCategory;
use crate::lutgemv::{gemv_tile, GemvJob};
use crate::prt::PatternReuseTable;
use crate::quant::SUPPORTED_BIT_WIDTHS;
use crate::typeconv::{
    int_to_float_cycles, int_to_float_inmem, twos_complement_to_sm, MAX_WIDTH, MIN_WIDTH,
};

/// SplitMix64 finalizer for deriving independent per-case seeds.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub const GEMV_DIMS: [(usize, usize); 3] = [(8, 8), (64, 64), (1024, 1024)];
pub const GEMV_BATCHES: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, Serialize)]
pub struct GemvCase {
    pub index: u32,
    pub seed: u64,
    pub weight_bits: u32,
    pub nbw: u32,
    pub k: usize,
    pub n: usize,
    pub batch: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GemvMismatch {
    pub case: GemvCase,
    pub batch_row: usize,
    pub col: usize,
    pub expected: i32,
    pub actual: i32,
    /// True when the reuse-table run disagreed with the plain run.
    pub prt_divergence: bool,
}

#[derive(Debug, Serialize)]
pub struct GemvCampaignReport {
    pub seed: u64,
    pub cases: u32,
    pub passed: u32,
    pub failed: u32,
    pub fault_injected: bool,
    pub first_mismatch: Option<GemvMismatch>,
}

impl GemvCampaignReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

/// Deterministic case parameters. The first cases walk the full
/// bit-width × basis-width grid against cycling shapes and batches so
/// every corner is always covered; later cases draw everything randomly
/// with large shapes kept rare.
pub fn gemv_case(campaign_seed: u64, index: u32) -> GemvCase {
    let seed = mix(campaign_seed ^ u64::from(index));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = SUPPORTED_BIT_WIDTHS.len() * 4;
    let (weight_bits, nbw, (k, n), batch) = if (index as usize) < grid {
        let i = index as usize;
        (
            SUPPORTED_BIT_WIDTHS[i % SUPPORTED_BIT_WIDTHS.len()],
            (i / SUPPORTED_BIT_WIDTHS.len()) as u32 + 1,
            GEMV_DIMS[i % GEMV_DIMS.len()],
            GEMV_BATCHES[i % GEMV_BATCHES.len()],
        )
    } else {
        let bits = SUPPORTED_BIT_WIDTHS[rng.random_range(0..SUPPORTED_BIT_WIDTHS.len())];
        let nbw = rng.random_range(1..=4);
        let dims = if rng.random_range(0..100) < 4 {
            GEMV_DIMS[2]
        } else {
            GEMV_DIMS[rng.random_range(0..2)]
        };
        let batch = GEMV_BATCHES[rng.random_range(0..GEMV_BATCHES.len())];
        (bits, nbw, dims, batch)
    };
    GemvCase {
        index,
        seed,
        weight_bits,
        nbw,
        k,
        n,
        batch,
    }
}

pub fn build_job(case: &GemvCase) -> GemvJob {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let qmax = (1i32 << (case.weight_bits - 1)) - 1;
    let weights = (0..case.k * case.n)
        .map(|_| rng.random_range(-qmax..=qmax))
        .collect();
    let activations = (0..case.batch * case.k).map(|_| rng.random_range(0..=255)).collect();
    GemvJob {
        batch: case.batch,
        k: case.k,
        n: case.n,
        nbw: case.nbw,
        weight_bits: case.weight_bits,
        act_bits: 8,
        array_rows: 256,
        activations,
        weights,
    }
}

/// Plain nested-loop integer GEMV, the independent reference.
pub fn oracle_gemv(job: &GemvJob) -> Vec<i32> {
    let mut out = vec![0i64; job.batch * job.n];
    for b in 0..job.batch {
        for i in 0..job.k {
            let a = job.activations[b * job.k + i] as i64;
            for j in 0..job.n {
                out[b * job.n + j] += a * job.weights[i * job.n + j] as i64;
            }
        }
    }
    out.into_iter().map(|v| v as i32).collect()
}

/// Run one case three ways: oracle, kernel, kernel with a reuse table.
/// Returns the first cell where any pair disagrees.
pub fn run_gemv_case(case: &GemvCase, inject_fault: bool) -> Result<Option<GemvMismatch>> {
    let job = build_job(case);
    job.validate()?;
    let expected = oracle_gemv(&job);
    let plain = gemv_tile(&job, None)?;
    let mut prt = PatternReuseTable::new();
    let reused = gemv_tile(&job, Some(&mut prt))?;

    let mut actual = plain.accumulators.clone();
    if inject_fault {
        actual[0] ^= 1;
    }
    for b in 0..job.batch {
        for j in 0..job.n {
            let at = b * job.n + j;
            let prt_divergence = reused.accumulators[at] != plain.accumulators[at];
            if actual[at] != expected[at] || prt_divergence {
                return Ok(Some(GemvMismatch {
                    case: case.clone(),
                    batch_row: b,
                    col: j,
                    expected: expected[at],
                    actual: actual[at],
                    prt_divergence,
                }));
            }
        }
    }
    Ok(None)
}

pub fn run_gemv_campaign(
    cases: u32,
    seed: u64,
    inject_fault: bool,
) -> Result<GemvCampaignReport> {
    let mut report = GemvCampaignReport {
        seed,
        cases,
        passed: 0,
        failed: 0,
        fault_injected: inject_fault,
        first_mismatch: None,
    };
    for index in 0..cases {
        let case = gemv_case(seed, index);
        match run_gemv_case(&case, inject_fault)? {
            None => report.passed += 1,
            Some(m) => {
                report.failed += 1;
                report.first_mismatch.get_or_insert(m);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeconvMismatch {
    pub n: usize,
    pub value: i64,
    pub expected_bits: u32,
    pub actual_bits: u32,
}

/// Per-width cycle audit: the exact charge for one conversion pass and the
/// worst observed logical-op count against the charged formula.
#[derive(Debug, Clone, Serialize)]
pub struct TypeconvAuditRow {
    pub n: usize,
    pub samples: u64,
    pub charged_cycles: u64,
    pub formula_cycles: u64,
    pub max_logical_ops: u64,
    pub ops_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct TypeconvReport {
    pub seed: u64,
    pub exhaustive_samples: u64,
    pub random_samples: u64,
    pub passed: u64,
    pub failed: u64,
    pub fault_injected: bool,
    pub first_mismatch: Option<TypeconvMismatch>,
    pub audit: Vec<TypeconvAuditRow>,
}

impl TypeconvReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
            && self
                .audit
                .iter()
                .all(|r| r.charged_cycles == r.formula_cycles && r.ops_ratio <= 1.25)
    }
}

/// Reference for the full convert path: an n-bit two's-complement value
/// becomes f32, with the one non-representable magnitude −2^(n−1)
/// saturating to −(2^(n−1)−1) in the sign-magnitude pre-pass.
pub fn reference_convert(value: i64, n: usize) -> f32 {
    let min = -(1i64 << (n - 1));
    if value == min {
        (min + 1) as f32
    } else {
        value as f32
    }
}

const BATCH_COLS: usize = 512;
const SRC_ROW: usize = 0;
const DST_ROW: usize = 64;

/// Convert up to 512 two's-complement values of width n in one array pass;
/// returns (float bits per value, conversion-step charge, logical ops).
fn convert_batch(values: &[i64], n: usize) -> Result<(Vec<u32>, u64, u64)> {
    let mut arr = BitPlaneArray::with_default_geometry();
    let raw: Vec<u64> = values
        .iter()
        .map(|&v| (v as u64) & ((1u64 << n) - 1))
        .collect();
    arr.transpose_in(&raw, n, SRC_ROW, 0)?;
    twos_complement_to_sm(&mut arr, SRC_ROW, n)?;
    let cycles_before = arr.ledger().get(ChargeCategory::TypeConvert);
    let ops_before = arr.logical_ops();
    int_to_float_inmem(&mut arr, SRC_ROW, n, DST_ROW)?;
    let charged = arr.ledger().get(ChargeCategory::TypeConvert) - cycles_before;
    let ops = arr.logical_ops() - ops_before;
    let bits = (0..values.len())
        .map(|c| arr.read_column(c, DST_ROW, 32).map(|b| b as u32))
        .collect::<Result<Vec<u32>>>()?;
    Ok((bits, charged, ops))
}

/// Edge inputs every width must cover: both zero patterns after the
/// sign-magnitude pass come from 0 and −2^(n−1)+1... the saturating
/// minimum, extremes, and the leading-one-at-n−2 pattern.
fn edge_values(n: usize) -> Vec<i64> {
    let max = (1i64 << (n - 1)) - 1;
    vec![0, 1, -1, max, -max, -(max + 1), 1i64 << (n - 2), -(1i64 << (n - 2))]
}

pub fn run_typeconv_campaign(
    random_samples: u64,
    seed: u64,
    inject_fault: bool,
) -> Result<TypeconvReport> {
    let mut report = TypeconvReport {
        seed,
        exhaustive_samples: 0,
        random_samples: 0,
        passed: 0,
        failed: 0,
        fault_injected: inject_fault,
        first_mismatch: None,
        audit: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed));
    let mut first_checked = false;

    for n in MIN_WIDTH..=MAX_WIDTH {
        let exhaustive = n <= 13;
        let mut values: Vec<i64> = edge_values(n);
        if exhaustive {
            let min = -(1i64 << (n - 1));
            values.extend(min..=-(min + 1));
        } else {
            let per_width = random_samples / (MAX_WIDTH as u64 - 13);
            let min = -(1i64 << (n - 1));
            let max = (1i64 << (n - 1)) - 1;
            values.extend((0..per_width).map(|_| rng.random_range(min..=max)));
        }

        let mut max_ops = 0u64;
        let mut charged_cycles = 0u64;
        let mut samples = 0u64;
        for chunk in values.chunks(BATCH_COLS) {
            let (bits, charged, ops) = convert_batch(chunk, n)?;
            charged_cycles = charged;
            max_ops = max_ops.max(ops);
            for (&value, &actual_bits) in chunk.iter().zip(&bits) {
                samples += 1;
                let mut expected_bits = reference_convert(value, n).to_bits();
                if inject_fault && !first_checked {
                    expected_bits ^= 1;
                }
                first_checked = true;
                if actual_bits == expected_bits {
                    report.passed += 1;
                } else {
                    report.failed += 1;
                    report.first_mismatch.get_or_insert(TypeconvMismatch {
                        n,
                        value,
                        expected_bits,
                        actual_bits,
                    });
                }
            }
        }
        if exhaustive {
            report.exhaustive_samples += samples;
        } else {
            report.random_samples += samples;
        }
        let formula = int_to_float_cycles(n);
        report.audit.push(TypeconvAuditRow {
            n,
            samples,
            charged_cycles,
            formula_cycles: formula,
            max_logical_ops: max_ops,
            ops_ratio: max_ops as f64 / formula as f64,
        });
    }
    Ok(report)
}
