//! Effective run settings: documented defaults, overlaid by an optional
//! `key = value` config file, overlaid by command-line flags.

use lutsim_core::pipeline::PipelineConfig;
use serde::Serialize;
use std::fmt::Display;
use std::str::FromStr;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub model: String,
    /// Randomized cases for check-gemv.
    pub cases: u32,
    /// Random samples for check-typeconv (spread over widths 14..=25).
    pub samples: u64,
    /// Emit a per-stage execution trace of one representative tile.
    pub trace: bool,
    pub sweep_nbw: Vec<u32>,
    pub sweep_bits: Vec<u32>,
    pub sweep_batch: Vec<u32>,
    #[serde(flatten)]
    pub pipe: PipelineConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            model: "toy".into(),
            cases: 1000,
            samples: 1_000_000,
            trace: false,
            sweep_nbw: vec![1, 2, 3, 4],
            sweep_bits: vec![2, 3, 4, 5, 6, 8],
            sweep_batch: vec![1, 2, 4, 8, 16, 24, 32],
            pipe: PipelineConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| format!("bad value `{value}` for {key}: {e}"))
}

fn parse_switch(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(format!("bad value `{other}` for {key}: expected on or off")),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<u32>, String> {
    value
        .split(',')
        .map(|item| parse(key, item.trim()))
        .collect()
}

/// Apply one configuration binding. Flag handling funnels through the
/// same keys, so file and flag semantics can never drift apart.
pub fn apply_key(s: &mut Settings, key: &str, value: &str) -> Result<(), String> {
    match key {
        "model" => s.model = value.to_string(),
        "cases" => s.cases = parse(key, value)?,
        "samples" => s.samples = parse(key, value)?,
        "trace" => s.trace = parse_switch(key, value)?,
        "seed" => s.pipe.seed = parse(key, value)?,
        "nbw" => s.pipe.nbw = parse(key, value)?,
        "bits" | "weight_bits" => s.pipe.weight_bits = parse(key, value)?,
        "batch" => s.pipe.batch = parse(key, value)?,
        "act_bits" => s.pipe.act_bits = parse(key, value)?,
        "group_size" => s.pipe.group_size = parse(key, value)?,
        "batch_slots" => s.pipe.batch_slots = parse(key, value)?,
        "arrays" => s.pipe.arrays = parse(key, value)?,
        "array_rows" => s.pipe.array_rows = parse(key, value)?,
        "llc_capacity_bytes" => s.pipe.llc_capacity_bytes = parse(key, value)?,
        "llc_slices" => s.pipe.llc_slices = parse(key, value)?,
        "core_clock_hz" => s.pipe.core_clock_hz = parse(key, value)?,
        "noc_bytes_per_cycle" => s.pipe.noc_bytes_per_cycle = parse(key, value)?,
        "noc_clock_hz" => s.pipe.noc_clock_hz = parse(key, value)?,
        "dram_bytes_per_sec" => s.pipe.dram_bytes_per_sec = parse(key, value)?,
        "lookup_step_cycles" => s.pipe.lookup_step_cycles = parse(key, value)?,
        "dequant_cost" => s.pipe.dequant_cost = parse(key, value)?,
        "kv_bits" => s.pipe.kv_bits = parse(key, value)?,
        "monthly_price" => s.pipe.monthly_price = parse(key, value)?,
        "prt" => s.pipe.prt = parse_switch(key, value)?,
        "prt_repeat_fraction" => s.pipe.prt_repeat_fraction = parse(key, value)?,
        "sweep_nbw" => s.sweep_nbw = parse_list(key, value)?,
        "sweep_bits" => s.sweep_bits = parse_list(key, value)?,
        "sweep_batch" => s.sweep_batch = parse_list(key, value)?,
        unknown => return Err(format!("unknown configuration key `{unknown}`")),
    }
    Ok(())
}

/// Line-oriented `key = value` file; `#` starts a comment anywhere.
pub fn apply_config_file(s: &mut Settings, text: &str) -> Result<(), String> {
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", idx + 1));
        };
        apply_key(s, key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", idx + 1))?;
    }
    Ok(())
}
