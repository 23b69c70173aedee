//! Subcommand bodies: each builds its result, writes machine-readable
//! reports under the output directory, prints a short human summary, and
//! returns the process exit status.

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use lutsim_core::arch::{CSramCluster, ClusterConfig, HasherConfig, LutmmInstruction, SimMemory};
use lutsim_core::ledger::{CycleLedger, ALL_CATEGORIES};
use lutsim_core::pipeline::{argmin_nbw, run, sweep, ModelSpec, PipelineConfig};
use lutsim_core::pipeline::sweep::{plot_csv, sweep_csv};
use lutsim_core::quant::{from_codes, write_sailt};
use lutsim_core::verify::{
    build_job, run_gemv_campaign, run_typeconv_campaign, GemvCampaignReport,
};
use lutsim_core::TensorKind;

use crate::config::Settings;

const EXIT_VERIFY_FAILED: u8 = 1;

fn out_dir(out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.unwrap_or(Path::new(".")).to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {dir:?}"))?;
    Ok(dir)
}

fn write_json(path: &Path, doc: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {path:?}"))?;
    Ok(())
}

/// Dump the failing weight matrix as a tensor fixture for offline replay.
fn write_counterexample_fixture(dir: &Path, report: &GemvCampaignReport) -> Result<PathBuf> {
    let case = &report
        .first_mismatch
        .as_ref()
        .expect("fixture only written on failure")
        .case;
    let job = build_job(case);
    let group = 8;
    let scales = vec![1.0f32; case.k * case.n / group];
    let tensor = from_codes(
        &job.weights,
        case.k,
        case.n,
        case.weight_bits,
        group,
        TensorKind::WeightSymmetric,
        scales,
        Vec::new(),
    )?;
    let path = dir.join("counterexample.sailt");
    let mut bytes = Vec::new();
    write_sailt(&tensor, &mut bytes)?;
    fs::write(&path, bytes).with_context(|| format!("writing {path:?}"))?;
    Ok(path)
}

pub fn check_gemv(s: &Settings, out: Option<&Path>, inject_fault: bool) -> Result<ExitCode> {
    let dir = out_dir(out)?;
    let report = run_gemv_campaign(s.cases, s.pipe.seed, inject_fault)?;
    let doc = json!({
        "command": "check-gemv",
        "config": s,
        "report": report,
    });
    write_json(&dir.join("check_gemv.json"), &doc)?;
    if report.ok() {
        println!(
            "check-gemv: {}/{} cases match the oracle (seed {})",
            report.passed, report.cases, report.seed
        );
        Ok(ExitCode::SUCCESS)
    } else {
        let m = report.first_mismatch.as_ref().expect("failed campaign");
        let fixture = write_counterexample_fixture(&dir, &report)?;
        eprintln!(
            "check-gemv: {}/{} cases FAILED; first mismatch at case {} (seed {}): \
             bits={} nbw={} {}x{} batch={} row={} col={} expected {} got {} (weights: {})",
            report.failed,
            report.cases,
            m.case.index,
            m.case.seed,
            m.case.weight_bits,
            m.case.nbw,
            m.case.k,
            m.case.n,
            m.case.batch,
            m.batch_row,
            m.col,
            m.expected,
            m.actual,
            fixture.display(),
        );
        Ok(ExitCode::from(EXIT_VERIFY_FAILED))
    }
}

pub fn check_typeconv(s: &Settings, out: Option<&Path>, inject_fault: bool) -> Result<ExitCode> {
    let dir = out_dir(out)?;
    let report = run_typeconv_campaign(s.samples, s.pipe.seed, inject_fault)?;
    let doc = json!({
        "command": "check-typeconv",
        "config": s,
        "report": report,
    });
    write_json(&dir.join("check_typeconv.json"), &doc)?;
    println!("  n  samples  charged  formula  max_ops  ratio");
    for row in &report.audit {
        println!(
            "{:>3}  {:>7}  {:>7}  {:>7}  {:>7}  {:.3}",
            row.n, row.samples, row.charged_cycles, row.formula_cycles, row.max_logical_ops,
            row.ops_ratio
        );
    }
    if report.ok() {
        println!(
            "check-typeconv: {} exhaustive + {} random conversions match (seed {})",
            report.exhaustive_samples, report.random_samples, report.seed
        );
        Ok(ExitCode::SUCCESS)
    } else {
        if let Some(m) = &report.first_mismatch {
            eprintln!(
                "check-typeconv: FAILED at n={} value={}: expected bits {:#010x}, got {:#010x}",
                m.n, m.value, m.expected_bits, m.actual_bits
            );
        } else {
            eprintln!("check-typeconv: FAILED cycle-formula audit");
        }
        Ok(ExitCode::from(EXIT_VERIFY_FAILED))
    }
}

/// Cycle-level execution of one representative weight tile, traced.
#[derive(Serialize)]
struct TileTrace {
    instruction: u32,
    group_iterations: usize,
    logical_ops: u64,
    trace_lines: u64,
    ledger: CycleLedger,
}

fn trace_tile(pipe: &PipelineConfig, dir: &Path) -> Result<TileTrace> {
    let config = ClusterConfig {
        arrays: pipe.arrays as usize,
        array_rows: pipe.array_rows as usize,
        nbw: pipe.nbw,
        dequant_cost: pipe.dequant_cost,
        hasher: HasherConfig {
            num_slices: pipe.llc_slices,
            ..HasherConfig::default()
        },
        trace: true,
        ..ClusterConfig::default()
    };
    let (tile_k, tile_n) = (config.tile_k, config.tile_n);
    let ql = pipe.weight_bits;
    // Keep magnitudes inside the converter's 24-bit window.
    let qmax = ((1i32 << (ql - 1)) - 1).min(7);
    let mut rng = ChaCha8Rng::seed_from_u64(pipe.seed);

    let weights_base = 0x1000u64;
    let scales_base = weights_base + (tile_k * tile_n) as u64;
    let acts_base = scales_base + (tile_n * 4) as u64;
    let result_base = acts_base + tile_k as u64;
    let mut memory = SimMemory::new(result_base as usize + tile_n * 4);
    for i in 0..tile_k * tile_n {
        let w: i32 = rng.random_range(-qmax..=qmax);
        memory.write(weights_base + i as u64, &[(w as i8) as u8])?;
    }
    for i in 0..tile_n {
        memory.write_f32_le(scales_base + (i * 4) as u64, rng.random_range(0.001f32..1.0))?;
    }
    for i in 0..tile_k {
        let a: u32 = rng.random_range(0..=9);
        memory.write(acts_base + i as u64, &[a as u8])?;
    }

    let mut cluster = CSramCluster::new(config)?;
    cluster.set_register(1, weights_base)?;
    cluster.set_register(2, acts_base)?;
    cluster.set_register(3, result_base)?;
    let instr = LutmmInstruction {
        rd: 3,
        ql,
        rw: 1,
        ri: 2,
        sc: 0,
        loc: 0,
    };
    let outcome = cluster.execute(&instr, &mut memory)?;
    let log = dir.join("trace.log");
    fs::write(&log, outcome.trace.join("\n") + "\n")
        .with_context(|| format!("writing {log:?}"))?;
    println!("trace: {} stage lines written to {}", outcome.trace.len(), log.display());
    Ok(TileTrace {
        instruction: instr.encode()?,
        group_iterations: outcome.group_iterations,
        logical_ops: outcome.logical_ops,
        trace_lines: outcome.trace.len() as u64,
        ledger: outcome.ledger,
    })
}

pub fn simulate(s: &Settings, out: Option<&Path>) -> Result<ExitCode> {
    let dir = out_dir(out)?;
    let model = ModelSpec::by_name(&s.model)?;
    let outcome = run(&model, &s.pipe)?;
    let tile_trace = if s.trace {
        Some(trace_tile(&s.pipe, &dir)?)
    } else {
        None
    };

    let mut csv = String::from("layer,tiles,load_cycles,compute_cycles,makespan_cycles\n");
    for row in &outcome.per_layer {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.layer, row.tiles, row.load_cycles, row.compute_cycles, row.makespan_cycles
        ));
    }
    fs::write(dir.join("layers.csv"), csv)?;

    let doc = json!({
        "command": "simulate",
        "config": s,
        "model": model,
        "outcome": outcome,
        "tile_trace": tile_trace,
    });
    write_json(&dir.join("report.json"), &doc)?;

    println!(
        "simulate {}: nbw={} bits={} batch={} prt={} seed={}",
        model.name, s.pipe.nbw, s.pipe.weight_bits, s.pipe.batch, s.pipe.prt, s.pipe.seed
    );
    println!("  cycles/token      {:.1}", outcome.cycles_per_token);
    println!("  kv cycles/token   {:.1}", outcome.kv_cycles_per_token);
    println!("  tokens/s          {:.2}", outcome.tokens_per_second);
    println!("  tokens/$          {:.0}", outcome.tokens_per_dollar);
    println!("  lut overhead      {:.2}%", outcome.lut_overhead_fraction * 100.0);
    for cat in ALL_CATEGORIES {
        println!("  {:<17} {}", cat.name(), outcome.ledger.get(cat));
    }
    if let Some(prt) = &outcome.prt {
        println!(
            "  reuse hits        {} of {} ({:.1}% hit rate, {} cycles saved)",
            prt.hits,
            prt.hits + prt.misses,
            prt.hit_rate() * 100.0,
            prt.cycles_saved
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sweep_cmd(s: &Settings, out: Option<&Path>) -> Result<ExitCode> {
    let dir = out_dir(out)?;
    let model = ModelSpec::by_name(&s.model)?;
    let records = sweep(&model, &s.pipe, &s.sweep_nbw, &s.sweep_bits, &s.sweep_batch)?;
    let cells = argmin_nbw(&records);

    fs::write(dir.join("sweep.csv"), sweep_csv(&records))?;
    fs::write(dir.join("sweep_plot.csv"), plot_csv(&records))?;
    let doc = json!({
        "command": "sweep",
        "config": s,
        "model": model,
        "records": records,
        "argmin_nbw": cells,
    });
    write_json(&dir.join("sweep.json"), &doc)?;

    let feasible = records.iter().filter(|r| r.is_ok()).count();
    println!(
        "sweep {}: {} cells ({} feasible) over nbw={:?} bits={:?} batch={:?}",
        model.name,
        records.len(),
        feasible,
        s.sweep_nbw,
        s.sweep_bits,
        s.sweep_batch
    );
    for c in &cells {
        match (c.best_nbw, c.cycles_per_token) {
            (Some(nbw), Some(cpt)) => println!(
                "  batch {:>2} bits {}: best nbw {} at {:.0} cycles/token",
                c.batch, c.weight_bits, nbw, cpt
            ),
            _ => println!("  batch {:>2} bits {}: no feasible basis width", c.batch, c.weight_bits),
        }
    }
    Ok(ExitCode::SUCCESS)
}
