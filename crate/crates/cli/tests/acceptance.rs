//! Acceptance gate: thirteen release criteria, one test per criterion.
//! Each prints a single `ACCEPTANCE Cnn <label>: PASS` line on success and
//! panics with a FAIL line carrying the counterexample otherwise. Every
//! numeric expectation is recomputed in-test rather than read back from
//! the code under test.

use std::collections::HashSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lutsim_core::arch::hasher::{hash_address, HasherConfig};
use lutsim_core::arch::isa::{tile_columns, LutmmInstruction, QL_LEVELS};
use lutsim_core::bitplane::BitPlaneArray;
use lutsim_core::ledger::ChargeCategory;
use lutsim_core::lutgemv::{gemv_tile, lookup_accumulate_cycles, max_bit_width, GemvJob, LutTable};
use lutsim_core::pipeline::{makespan, run, tokens_per_dollar, ModelSpec, PipelineConfig};
use lutsim_core::verify::{build_job, gemv_case, run_gemv_campaign, run_typeconv_campaign};
use lutsim_core::SimError;

fn criterion(id: &str, label: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("ACCEPTANCE {id} {label}: PASS"),
        Err(detail) => panic!("ACCEPTANCE {id} {label}: FAIL - {detail}"),
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

fn toy_cfg(nbw: u32, weight_bits: u32, batch: u32) -> PipelineConfig {
    PipelineConfig {
        nbw,
        weight_bits,
        batch,
        ..PipelineConfig::default()
    }
}

#[test]
fn ac01_lut_gemv_matches_integer_oracle() {
    criterion("C01", "lut-gemv bit-exact vs oracle, 1000 cases", || {
        let start = Instant::now();
        let report = run_gemv_campaign(1000, 0xACCE_0001, false).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure!(
            report.ok() && report.passed == 1000,
            "{} of {} cases mismatched, first: {:?}",
            report.failed,
            report.cases,
            report.first_mismatch
        );
        ensure!(
            elapsed < Duration::from_secs(300),
            "campaign took {elapsed:?}, budget is 300s"
        );

        // The case generator must span the whole advertised grid.
        let mut combos = HashSet::new();
        let mut dims = HashSet::new();
        let mut batches = HashSet::new();
        for i in 0..1000 {
            let c = gemv_case(0xACCE_0001, i);
            combos.insert((c.weight_bits, c.nbw));
            dims.insert((c.k, c.n));
            batches.insert(c.batch);
        }
        ensure!(
            combos.len() == 24 && dims.len() == 3 && batches.len() == 4,
            "coverage: {} bit/basis combos, {} shapes, {} batch sizes",
            combos.len(),
            dims.len(),
            batches.len()
        );

        // Spot-check the kernel against a second reference written here,
        // accumulating per output cell instead of per input row.
        for index in [0, 7, 123, 999] {
            let case = gemv_case(0xACCE_0001, index);
            let job = build_job(&case);
            let out = gemv_tile(&job, None).map_err(|e| e.to_string())?;
            for b in 0..job.batch {
                for j in 0..job.n {
                    let mut acc = 0i128;
                    for i in 0..job.k {
                        acc += job.activations[b * job.k + i] as i128
                            * job.weights[i * job.n + j] as i128;
                    }
                    ensure!(
                        out.accumulators[b * job.n + j] as i128 == acc,
                        "case {index} cell ({b},{j}): kernel {} vs reference {acc}",
                        out.accumulators[b * job.n + j]
                    );
                }
            }
        }
        Ok(())
    });
}

#[test]
fn ac02_three_weight_walkthrough() {
    criterion("C02", "3-weight 4-bit walkthrough", || {
        let (w0, w1, w2) = (3i32, -2, 5);
        let table = LutTable::build(&[w0, w1, w2], 4, 256).map_err(|e| e.to_string())?;

        // Bit j of the pattern (MSB first) selects basis weight j.
        let retrievals = [
            (0b001u32, w2),
            (0b010, w1),
            (0b100, w0),
            (0b011, w1 + w2),
            (0b111, w0 + w1 + w2),
            (0b000, 0),
        ];
        for (pattern, want) in retrievals {
            let got = table.lookup(pattern).map_err(|e| e.to_string())?;
            ensure!(got == want, "lookup({pattern:03b}) = {got}, expected {want}");
        }

        // A=9, B=6, C=11 against the same three weights, 4-bit activations.
        let (a, b, c) = (9u32, 6, 11);
        let job = GemvJob {
            batch: 1,
            k: 3,
            n: 1,
            nbw: 3,
            weight_bits: 4,
            act_bits: 4,
            array_rows: 256,
            activations: vec![a, b, c],
            weights: vec![w0, w1, w2],
        };
        let out = gemv_tile(&job, None).map_err(|e| e.to_string())?;
        let want = (a as i32) * w0 + (b as i32) * w1 + (c as i32) * w2;
        ensure!(
            out.accumulators == [want],
            "accumulator {:?}, expected [{want}]",
            out.accumulators
        );

        // Exactly 4 lookup steps, one per activation bit plane.
        let charged = out.ledger.get(ChargeCategory::LookupAccumulate);
        let per_step = lookup_accumulate_cycles(32);
        ensure!(
            charged == 4 * per_step,
            "lookup charge {charged}, expected 4 steps x {per_step}"
        );

        // Rebuild the same result by hand from the four bit-plane patterns.
        let mut shifted = 0i32;
        for t in 0..4 {
            let m = ((a >> t) & 1) << 2 | ((b >> t) & 1) << 1 | ((c >> t) & 1);
            shifted += table.lookup(m).map_err(|e| e.to_string())? << t;
        }
        ensure!(shifted == want, "shift-add replay {shifted}, expected {want}");
        Ok(())
    });
}

#[test]
fn ac03_type_conversion_campaign() {
    criterion("C03", "int-to-float exhaustive + 1e6 random", || {
        let report = run_typeconv_campaign(1_000_000, 0xACCE_0003, false)
            .map_err(|e| e.to_string())?;
        ensure!(
            report.ok() && report.failed == 0,
            "{} mismatches, first: {:?}",
            report.failed,
            report.first_mismatch
        );
        // Widths 2..=13 exhaustively: sum of 2^n values is 2^14 - 4.
        ensure!(
            report.exhaustive_samples >= (1 << 14) - 4,
            "only {} exhaustive samples",
            report.exhaustive_samples
        );
        ensure!(
            report.random_samples >= 1_000_000,
            "only {} random samples for widths 14..=25",
            report.random_samples
        );
        ensure!(report.audit.len() == 24, "{} audit rows", report.audit.len());
        for row in &report.audit {
            let n = row.n as u64;
            let formula = (3 * n * n).div_ceil(2) + 39 * (n - 1);
            ensure!(
                row.charged_cycles == formula,
                "width {}: charged {} cycles, formula gives {formula}",
                row.n,
                row.charged_cycles
            );
            ensure!(
                row.max_logical_ops as f64 <= 1.25 * formula as f64,
                "width {}: {} logical ops exceeds 1.25 x {formula}",
                row.n,
                row.max_logical_ops
            );
        }
        Ok(())
    });
}

#[test]
fn ac04_bit_serial_cost_formulas() {
    criterion("C04", "add and mult cycle formulas, n in 2..16", || {
        let mut rng = StdRng::seed_from_u64(0xACCE_0004);
        for n in 2usize..=16 {
            let mask = (1u64 << n) - 1;
            let a: Vec<u64> = (0..64).map(|_| rng.random::<u64>() & mask).collect();
            let b: Vec<u64> = (0..64).map(|_| rng.random::<u64>() & mask).collect();
            let mut arr = BitPlaneArray::with_default_geometry();
            arr.transpose_in(&a, n, 0, 0).map_err(|e| e.to_string())?;
            arr.transpose_in(&b, n, 40, 0).map_err(|e| e.to_string())?;

            let before = arr.cycles();
            arr.bitserial_add(0, 40, 80, n).map_err(|e| e.to_string())?;
            let add_charge = arr.cycles() - before;
            ensure!(
                add_charge == (n + 1) as u64,
                "add at n={n} charged {add_charge}, expected {}",
                n + 1
            );

            let before = arr.cycles();
            arr.bitserial_mult(0, 40, 120, n).map_err(|e| e.to_string())?;
            let mult_charge = arr.cycles() - before;
            let want = (n * n + 5 * n - 2) as u64;
            ensure!(
                mult_charge == want,
                "mult at n={n} charged {mult_charge}, expected {want}"
            );

            // The charges must pay for correct arithmetic.
            for (col, (&x, &y)) in a.iter().zip(&b).enumerate() {
                let sum = arr.read_column(col, 80, n + 1).map_err(|e| e.to_string())?;
                ensure!(sum == x + y, "n={n} col {col}: add {sum}, expected {}", x + y);
                let prod = arr.read_column(col, 120, 2 * n).map_err(|e| e.to_string())?;
                ensure!(prod == x * y, "n={n} col {col}: mult {prod}, expected {}", x * y);
            }
        }
        Ok(())
    });
}

#[test]
fn ac05_table_capacity_law() {
    criterion("C05", "entry-width capacity bound", || {
        ensure!(
            max_bit_width(256, 2) == 64,
            "max_bit_width(256, 2) = {}, expected 64",
            max_bit_width(256, 2)
        );
        // Every (entry_width, basis width) pair over the row budget must be
        // rejected, every pair within it accepted. Entry width recomputed
        // here: weight bits + ceil(log2 nbw) guard bits + a sign bit.
        for rows in [32usize, 64, 128, 256, 512] {
            for nbw in 1u32..=4 {
                for bits in [2u32, 3, 4, 5, 6, 8] {
                    let guard = (nbw as usize).next_power_of_two().trailing_zeros();
                    let ew = (bits + guard + 1) as usize;
                    let fits = ew <= rows >> nbw;
                    let basis = vec![1i32; nbw as usize];
                    match LutTable::build(&basis, bits, rows) {
                        Ok(_) => ensure!(
                            fits,
                            "build accepted bits={bits} nbw={nbw} rows={rows}, \
                             entry width {ew} > {}",
                            rows >> nbw
                        ),
                        Err(SimError::LutCapacity { .. }) => ensure!(
                            !fits,
                            "build rejected bits={bits} nbw={nbw} rows={rows}, \
                             entry width {ew} <= {}",
                            rows >> nbw
                        ),
                        Err(other) => {
                            return Err(format!(
                                "unexpected error for bits={bits} nbw={nbw} rows={rows}: {other}"
                            ))
                        }
                    }
                }
            }
        }
        Ok(())
    });
}

#[test]
fn ac06_config_ordering_at_batch_24() {
    criterion("C06", "config ordering and speedup band at batch 24", || {
        let toy = ModelSpec::toy();
        let c42 = run(&toy, &toy_cfg(4, 2, 24)).map_err(|e| e.to_string())?;
        let c44 = run(&toy, &toy_cfg(4, 4, 24)).map_err(|e| e.to_string())?;
        let c22 = run(&toy, &toy_cfg(2, 2, 24)).map_err(|e| e.to_string())?;
        ensure!(
            c42.cycles_per_token < c44.cycles_per_token,
            "nbw4/2-bit {} not under nbw4/4-bit {}",
            c42.cycles_per_token,
            c44.cycles_per_token
        );
        ensure!(
            c44.cycles_per_token < c22.cycles_per_token,
            "nbw4/4-bit {} not under nbw2/2-bit {}",
            c44.cycles_per_token,
            c22.cycles_per_token
        );
        let ratio = c22.cycles_per_token / c42.cycles_per_token;
        ensure!(
            (1.9..=7.6).contains(&ratio),
            "nbw2/nbw4 speedup {ratio} outside [1.9, 7.6]"
        );
        Ok(())
    });
}

#[test]
fn ac07_batching_never_hurts() {
    criterion("C07", "per-token cycles non-increasing in batch", || {
        let toy = ModelSpec::toy();
        for (nbw, bits) in [(1u32, 2u32), (2, 2), (4, 2), (2, 4), (4, 4), (2, 8), (4, 8)] {
            let mut cpt = Vec::with_capacity(32);
            for batch in 1u32..=32 {
                let o = run(&toy, &toy_cfg(nbw, bits, batch)).map_err(|e| e.to_string())?;
                if let Some(&prev) = cpt.last() {
                    ensure!(
                        o.cycles_per_token <= prev,
                        "nbw={nbw} bits={bits}: per-token cycles rose {prev} -> {} \
                         at batch {batch}",
                        o.cycles_per_token
                    );
                }
                cpt.push(o.cycles_per_token);
            }
            let knee = (cpt[6] - cpt[7]) / cpt[6];
            ensure!(
                knee < 0.10,
                "nbw={nbw} bits={bits}: batch 7->8 improvement {knee} is not under 10%"
            );
        }
        Ok(())
    });
}

#[test]
fn ac08_table_overhead_fractions() {
    criterion("C08", "table-build overhead fraction bands", || {
        let toy = ModelSpec::toy();
        let small = run(&toy, &toy_cfg(2, 2, 8)).map_err(|e| e.to_string())?;
        ensure!(
            (0.015..=0.06).contains(&small.lut_overhead_fraction),
            "batch 8 / nbw 2 / 2-bit overhead {} outside [1.5%, 6%]",
            small.lut_overhead_fraction
        );
        let large = run(&toy, &toy_cfg(4, 4, 32)).map_err(|e| e.to_string())?;
        ensure!(
            (0.06..=0.18).contains(&large.lut_overhead_fraction),
            "batch 32 / nbw 4 / 4-bit overhead {} outside [6%, 18%]",
            large.lut_overhead_fraction
        );
        Ok(())
    });
}

#[test]
fn ac09_reuse_table_transparent_and_profitable() {
    criterion("C09", "pattern reuse: transparency, accounting, reduction", || {
        // Transparency: the full campaign reruns every case with the reuse
        // table and flags any divergence from the plain kernel.
        let report = run_gemv_campaign(1000, 0xACCE_0009, false).map_err(|e| e.to_string())?;
        ensure!(
            report.ok(),
            "reuse-enabled campaign diverged: {:?}",
            report.first_mismatch
        );

        // Accounting identity: every saved cycle leaves both the lookup
        // ledger row and the critical path, exactly.
        let toy = ModelSpec::toy();
        let off = run(&toy, &toy_cfg(2, 4, 8)).map_err(|e| e.to_string())?;
        let mut cfg_on = toy_cfg(2, 4, 8);
        cfg_on.prt = true;
        let on = run(&toy, &cfg_on).map_err(|e| e.to_string())?;
        let stats = on.prt.ok_or("reuse stats missing from the run")?;
        ensure!(
            off.work_cycles - on.work_cycles == stats.cycles_saved,
            "work delta {} != cycles_saved {}",
            off.work_cycles - on.work_cycles,
            stats.cycles_saved
        );
        ensure!(
            off.makespan_cycles - on.makespan_cycles == stats.cycles_saved as f64,
            "makespan delta {} != cycles_saved {}",
            off.makespan_cycles - on.makespan_cycles,
            stats.cycles_saved
        );
        let lookup_delta = off.ledger.get(ChargeCategory::LookupAccumulate)
            - on.ledger.get(ChargeCategory::LookupAccumulate);
        ensure!(
            lookup_delta == stats.cycles_saved,
            "lookup ledger delta {lookup_delta} != cycles_saved {}",
            stats.cycles_saved
        );

        // Synthetic trace at the default 17% repeat fraction: hit rate
        // tracks the plant rate and the end-to-end cut lands in band.
        let events = (stats.hits + stats.misses) as f64;
        let hit_rate = stats.hits as f64 / events;
        ensure!(
            (0.16..=0.19).contains(&hit_rate),
            "hit rate {hit_rate} strayed from the 17% plant rate"
        );
        let reduction = 1.0 - on.makespan_cycles / off.makespan_cycles;
        ensure!(
            (0.08..=0.18).contains(&reduction),
            "cycle reduction {reduction} outside [8%, 18%]"
        );

        // A batch of one has no earlier row to repeat: zero savings.
        let mut cfg_b1 = toy_cfg(2, 4, 1);
        cfg_b1.prt = true;
        let b1 = run(&toy, &cfg_b1).map_err(|e| e.to_string())?;
        ensure!(
            b1.prt.map(|s| s.cycles_saved) == Some(0),
            "batch-1 run saved {:?} cycles, expected 0",
            b1.prt.map(|s| s.cycles_saved)
        );
        Ok(())
    });
}

#[test]
fn ac10_instruction_round_trip() {
    criterion("C10", "instruction encode/decode and tile columns", || {
        let mut rng = StdRng::seed_from_u64(0xACCE_0010);
        for i in 0..100_000u32 {
            let sc = rng.random_range(0..8u8);
            let instr = LutmmInstruction {
                rd: rng.random_range(0..32),
                ql: QL_LEVELS[rng.random_range(0..QL_LEVELS.len())],
                rw: rng.random_range(0..32),
                ri: rng.random_range(0..32),
                sc,
                loc: rng.random_range(0..(1u32 << sc).min(16)) as u8,
            };
            let word = instr.encode().map_err(|e| format!("case {i}: {e}"))?;
            let back = LutmmInstruction::decode(word).map_err(|e| format!("case {i}: {e}"))?;
            ensure!(back == instr, "case {i}: {instr:?} -> {word:#010x} -> {back:?}");
        }
        let cols = tile_columns(5, 3).map_err(|e| e.to_string())?;
        ensure!(
            cols == (5120..6144),
            "tile_columns(5, 3) = {cols:?}, expected 5120..6144"
        );
        Ok(())
    });
}

#[test]
fn ac11_slice_hash_blocks_and_spread() {
    criterion("C11", "block integrity and uniform slice spread", || {
        let cfg = HasherConfig::default();
        let mut rng = StdRng::seed_from_u64(0xACCE_0011);
        for _ in 0..300 {
            let base = (rng.random::<u64>() >> 9) << 9;
            let slice = hash_address(base, &cfg);
            for offset in 1..512u64 {
                let got = hash_address(base + offset, &cfg);
                ensure!(
                    got == slice,
                    "block {base:#x}: offset {offset} went to slice {got}, base to {slice}"
                );
            }
        }
        let mut hist = [0u64; 32];
        for block in 0..1u64 << 20 {
            hist[hash_address(block << 9, &cfg) as usize] += 1;
        }
        let expect = (1u64 << 20) / 32;
        let tol = expect / 100;
        for (slice, &count) in hist.iter().enumerate() {
            ensure!(
                count.abs_diff(expect) <= tol,
                "slice {slice} got {count} blocks, expected {expect} +- {tol}"
            );
        }
        Ok(())
    });
}

#[test]
fn ac12_pipeline_bounds_and_price_rate() {
    criterion("C12", "makespan bounds and tokens-per-dollar", || {
        let mut rng = StdRng::seed_from_u64(0xACCE_0012);
        for i in 0..10_000u32 {
            let n = rng.random_range(1..=40);
            let loads: Vec<f64> = (0..n).map(|_| rng.random_range(0..1000) as f64).collect();
            let computes: Vec<f64> = (0..n).map(|_| rng.random_range(0..1000) as f64).collect();
            let m = makespan(&loads, &computes);

            // Event-driven replay: loads serialize, compute i waits for its
            // load and its predecessor, and the double buffer holds load
            // i until compute i-2 has drained.
            let mut done = vec![0.0f64; n];
            let mut load_done = 0.0f64;
            for t in 0..n {
                let buffer_free = if t >= 2 { done[t - 2] } else { 0.0 };
                load_done = load_done.max(buffer_free) + loads[t];
                let prev = if t >= 1 { done[t - 1] } else { 0.0 };
                done[t] = load_done.max(prev) + computes[t];
            }
            ensure!(
                m == done[n - 1],
                "schedule {i}: makespan {m} != replay {}",
                done[n - 1]
            );

            let sum_l: f64 = loads.iter().sum();
            let sum_c: f64 = computes.iter().sum();
            ensure!(
                m >= sum_l.max(sum_c) && m <= sum_l + sum_c,
                "schedule {i}: makespan {m} outside [max({sum_l}, {sum_c}), {}]",
                sum_l + sum_c
            );
            ensure!(
                m >= loads[0] + sum_c && m >= sum_l + computes[n - 1],
                "schedule {i}: makespan {m} under a structural lower bound"
            );
        }

        // One token per second for one month at the month's price is
        // exactly one token per dollar.
        let trivial = tokens_per_dollar(1.0, 2_592_000.0).map_err(|e| e.to_string())?;
        ensure!(trivial == 1.0, "trivial tokens-per-dollar {trivial}, expected 1.0");

        let tpd = tokens_per_dollar(134.22, 665.45).map_err(|e| e.to_string())?;
        let want = 134.22 * 2_592_000.0 / 665.45;
        ensure!(
            (tpd - want).abs() <= want * 1e-12,
            "tokens-per-dollar {tpd}, expected {want}"
        );
        ensure!(
            (tpd - 522_801.0).abs() < 1.0,
            "priced example {tpd} strayed from 522801"
        );
        Ok(())
    });
}

#[test]
fn ac13_end_to_end_simulate() {
    criterion("C13", "binary simulates the toy model end to end", || {
        let dir = std::env::temp_dir().join(format!("lutsim-acceptance-{}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_lutsim"))
            .args([
                "simulate", "--model", "toy", "--nbw", "2", "--bits", "4", "--batch", "8",
                "--seed", "7", "--out",
            ])
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure!(
            out.status.success(),
            "exit {:?}, stderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        ensure!(
            elapsed < Duration::from_secs(60),
            "simulate took {elapsed:?}, budget is 60s"
        );

        let raw = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
        let doc: serde_json::Value = serde_json::from_str(&raw).map_err(|e| e.to_string())?;
        let outcome = &doc["outcome"];

        // The ledger is complete: the seven categories sum to total work.
        let categories = [
            "lut_build",
            "lookup_accumulate",
            "type_convert",
            "transpose",
            "aggregate",
            "load",
            "other",
        ];
        let mut total = 0u64;
        for key in categories {
            total += outcome["ledger"][key]
                .as_u64()
                .ok_or_else(|| format!("ledger category {key} missing from the report"))?;
        }
        let work = outcome["work_cycles"].as_u64().ok_or("work_cycles missing")?;
        ensure!(total == work, "ledger categories sum to {total}, work is {work}");

        ensure!(
            doc["model"]["hidden"].as_u64() == Some(1024)
                && doc["model"]["context_length"].as_u64() == Some(4096),
            "report model is not the hidden-1024, context-4096 toy shape: {}",
            doc["model"]
        );
        let cpt = outcome["cycles_per_token"].as_f64().ok_or("cycles_per_token missing")?;
        let kv = outcome["kv_cycles_per_token"]
            .as_f64()
            .ok_or("kv_cycles_per_token missing")?;
        ensure!(cpt > 0.0 && kv > 0.0, "degenerate totals: cpt {cpt}, kv {kv}");
        let share = kv / (cpt + kv);
        ensure!(share < 0.15, "KV-attention share {share} is not under 15%");
        Ok(())
    });
}
