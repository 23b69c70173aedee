//! Design-space sweep over basis width, weight precision, and batch size,
//! with per-cell results, a plotting pivot, and best-basis selection.

use serde::Serialize;
use std::fmt::Write;

use crate::error::Result;

use super::run::run;
use super::{ModelSpec, PipelineConfig};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub nbw: u32,
    pub weight_bits: u32,
    pub batch: u32,
    /// "ok", or the error that made this cell infeasible.
    pub status: String,
    pub total_cycles: f64,
    pub cycles_per_token: f64,
    pub kv_cycles_per_token: f64,
    pub lut_overhead_fraction: f64,
    pub tokens_per_second: f64,
    pub tokens_per_dollar: f64,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Run every (nbw × weight_bits × batch) cell. Infeasible cells are kept
/// with their error text so a sweep over a mixed grid stays rectangular.
pub fn sweep(
    model: &ModelSpec,
    base: &PipelineConfig,
    nbws: &[u32],
    bits: &[u32],
    batches: &[u32],
) -> Result<Vec<SweepRecord>> {
    model.validate()?;
    let mut records = Vec::with_capacity(nbws.len() * bits.len() * batches.len());
    for &batch in batches {
        for &weight_bits in bits {
            for &nbw in nbws {
                let cfg = PipelineConfig {
                    nbw,
                    weight_bits,
                    batch,
                    ..base.clone()
                };
                let rec = match run(model, &cfg) {
                    Ok(o) => SweepRecord {
                        nbw,
                        weight_bits,
                        batch,
                        status: "ok".into(),
                        total_cycles: o.makespan_cycles,
                        cycles_per_token: o.cycles_per_token,
                        kv_cycles_per_token: o.kv_cycles_per_token,
                        lut_overhead_fraction: o.lut_overhead_fraction,
                        tokens_per_second: o.tokens_per_second,
                        tokens_per_dollar: o.tokens_per_dollar,
                    },
                    Err(e) => SweepRecord {
                        nbw,
                        weight_bits,
                        batch,
                        status: e.to_string(),
                        total_cycles: 0.0,
                        cycles_per_token: 0.0,
                        kv_cycles_per_token: 0.0,
                        lut_overhead_fraction: 0.0,
                        tokens_per_second: 0.0,
                        tokens_per_dollar: 0.0,
                    },
                };
                records.push(rec);
            }
        }
    }
    Ok(records)
}

/// Cheapest feasible basis width for each (batch, weight_bits) cell.
#[derive(Debug, Clone, Serialize)]
pub struct ArgminCell {
    pub batch: u32,
    pub weight_bits: u32,
    pub best_nbw: Option<u32>,
    pub cycles_per_token: Option<f64>,
}

pub fn argmin_nbw(records: &[SweepRecord]) -> Vec<ArgminCell> {
    let mut cells: Vec<ArgminCell> = Vec::new();
    for r in records {
        let cell = match cells
            .iter_mut()
            .find(|c| c.batch == r.batch && c.weight_bits == r.weight_bits)
        {
            Some(c) => c,
            None => {
                cells.push(ArgminCell {
                    batch: r.batch,
                    weight_bits: r.weight_bits,
                    best_nbw: None,
                    cycles_per_token: None,
                });
                cells.last_mut().unwrap()
            }
        };
        if !r.is_ok() {
            continue;
        }
        if cell
            .cycles_per_token
            .is_none_or(|best| r.cycles_per_token < best)
        {
            cell.best_nbw = Some(r.nbw);
            cell.cycles_per_token = Some(r.cycles_per_token);
        }
    }
    cells
}

/// Long-form CSV: one row per sweep cell.
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(
        "nbw,weight_bits,batch,status,total_cycles,cycles_per_token,\
         kv_cycles_per_token,lut_overhead_fraction,tokens_per_second,tokens_per_dollar\n",
    );
    for r in records {
        let status = r.status.replace(',', ";");
        writeln!(
            out,
            "{},{},{},{},{:.0},{:.3},{:.3},{:.6},{:.4},{:.2}",
            r.nbw,
            r.weight_bits,
            r.batch,
            status,
            r.total_cycles,
            r.cycles_per_token,
            r.kv_cycles_per_token,
            r.lut_overhead_fraction,
            r.tokens_per_second,
            r.tokens_per_dollar
        )
        .expect("string write");
    }
    out
}

/// Wide-form CSV for throughput curves: one row per batch, one
/// tokens-per-second column per (weight_bits, nbw) pair. Infeasible cells
/// stay empty.
pub fn plot_csv(records: &[SweepRecord]) -> String {
    let mut combos: Vec<(u32, u32)> = Vec::new();
    let mut batches: Vec<u32> = Vec::new();
    for r in records {
        if !combos.contains(&(r.weight_bits, r.nbw)) {
            combos.push((r.weight_bits, r.nbw));
        }
        if !batches.contains(&r.batch) {
            batches.push(r.batch);
        }
    }
    combos.sort_unstable();
    batches.sort_unstable();

    let mut out = String::from("batch");
    for &(bits, nbw) in &combos {
        write!(out, ",tps_b{bits}_nbw{nbw}").expect("string write");
    }
    out.push('\n');
    for &batch in &batches {
        write!(out, "{batch}").expect("string write");
        for &(bits, nbw) in &combos {
            let cell = records
                .iter()
                .find(|r| r.batch == batch && r.weight_bits == bits && r.nbw == nbw);
            match cell {
                Some(r) if r.is_ok() => {
                    write!(out, ",{:.4}", r.tokens_per_second).expect("string write")
                }
                _ => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_grid_matches_run() {
        let toy = ModelSpec::toy();
        let base = PipelineConfig::default();
        let recs = sweep(&toy, &base, &[4], &[2], &[24]).unwrap();
        assert_eq!(recs.len(), 1);
        let cfg = PipelineConfig {
            nbw: 4,
            weight_bits: 2,
            batch: 24,
            ..base
        };
        let o = run(&toy, &cfg).unwrap();
        assert!(recs[0].is_ok());
        assert_eq!(recs[0].cycles_per_token, o.cycles_per_token);
        assert_eq!(recs[0].tokens_per_second, o.tokens_per_second);
    }

    #[test]
    fn sweep_is_deterministic() {
        let toy = ModelSpec::toy();
        let base = PipelineConfig {
            prt: true,
            ..PipelineConfig::default()
        };
        let a = sweep(&toy, &base, &[2, 4], &[2, 4], &[1, 8]).unwrap();
        let b = sweep(&toy, &base, &[2, 4], &[2, 4], &[1, 8]).unwrap();
        let csv_a = sweep_csv(&a);
        assert_eq!(csv_a, sweep_csv(&b));
        assert_eq!(csv_a.lines().count(), 1 + 8);
    }

    #[test]
    fn infeasible_cells_are_recorded() {
        let toy = ModelSpec::toy();
        // 128 rows: nbw 4 at 8-bit weights needs 11 × 16 + 64 = 240 rows.
        let base = PipelineConfig {
            array_rows: 128,
            ..PipelineConfig::default()
        };
        let recs = sweep(&toy, &base, &[1, 4], &[2, 8], &[8]).unwrap();
        assert_eq!(recs.len(), 4);
        let bad: Vec<_> = recs.iter().filter(|r| !r.is_ok()).collect();
        assert!(!bad.is_empty(), "expected at least one infeasible cell");
        for r in &bad {
            assert_eq!(r.cycles_per_token, 0.0);
            assert!(!r.status.is_empty());
        }
        // Argmin skips infeasible cells but keeps the grid cell itself.
        let cells = argmin_nbw(&recs);
        assert_eq!(cells.len(), 2);
        let all_bad_cell = cells
            .iter()
            .find(|c| c.weight_bits == 8 && c.best_nbw.is_none());
        // nbw 1 at 8-bit weights needs 9 × 2 + 64 = 82 rows: feasible.
        assert!(all_bad_cell.is_none());
        let wide = cells.iter().find(|c| c.weight_bits == 8).unwrap();
        assert_eq!(wide.best_nbw, Some(1));
    }

    #[test]
    fn argmin_prefers_wider_basis_when_feasible() {
        let toy = ModelSpec::toy();
        let base = PipelineConfig::default();
        let recs = sweep(&toy, &base, &[1, 2, 3, 4], &[2], &[8]).unwrap();
        let cells = argmin_nbw(&recs);
        assert_eq!(cells.len(), 1);
        // Wider groups quarter the lookup stream; build growth is smaller.
        assert_eq!(cells[0].best_nbw, Some(4));
    }

    #[test]
    fn csv_shapes() {
        let toy = ModelSpec::toy();
        let base = PipelineConfig::default();
        let recs = sweep(&toy, &base, &[2, 4], &[2], &[1, 8]).unwrap();
        let long = sweep_csv(&recs);
        assert_eq!(long.lines().count(), 5);
        assert!(long.starts_with("nbw,weight_bits,batch,status"));
        let wide = plot_csv(&recs);
        let mut lines = wide.lines();
        assert_eq!(lines.next().unwrap(), "batch,tps_b2_nbw2,tps_b2_nbw4");
        assert_eq!(wide.lines().count(), 3);
        for row in lines {
            assert_eq!(row.split(',').count(), 3);
        }
    }
}
