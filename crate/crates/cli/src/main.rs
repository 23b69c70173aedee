//! `lutsim`: verification campaigns, token-generation simulations, and
//! design-space sweeps for the near-cache lookup-table GEMV engine.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use config::{apply_config_file, apply_key, Settings};

#[derive(Parser)]
#[command(
    name = "lutsim",
    version,
    about = "Cycle-level simulator of a near-cache lookup-table GEMV engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Config file of `key = value` lines; flags override file values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports (default: current directory)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ShapeArgs {
    /// Model preset: toy, llama7b_like, llama13b_like
    #[arg(long)]
    model: Option<String>,
    /// Basis weights per lookup table (1..=4)
    #[arg(long)]
    nbw: Option<u32>,
    /// Weight bit width (2, 3, 4, 5, 6, or 8)
    #[arg(long)]
    bits: Option<u32>,
    /// Batched sequences served per generation step
    #[arg(long)]
    batch: Option<u32>,
    /// Pattern reuse table
    #[arg(long, value_parser = ["on", "off"])]
    prt: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the lookup kernel against a nested-loop integer oracle
    CheckGemv {
        #[command(flatten)]
        common: CommonArgs,
        /// Randomized cases to run
        #[arg(long)]
        cases: Option<u32>,
        /// Corrupt one result to prove the oracle bites (test hook)
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Check the in-memory int-to-float converter and its cycle formula
    CheckTypeconv {
        #[command(flatten)]
        common: CommonArgs,
        /// Random samples across widths 14..=25
        #[arg(long)]
        samples: Option<u64>,
        /// Corrupt one expectation to prove the check bites (test hook)
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Simulate token generation for one model and configuration
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        shape: ShapeArgs,
        /// Execute one tile on the cycle-level cluster and log its stages
        #[arg(long)]
        trace: bool,
    },
    /// Sweep basis width, weight bits, and batch over a grid
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Model preset: toy, llama7b_like, llama13b_like
        #[arg(long)]
        model: Option<String>,
        /// Basis-width grid, comma separated
        #[arg(long, value_delimiter = ',')]
        nbw: Option<Vec<u32>>,
        /// Weight bit-width grid, comma separated
        #[arg(long, value_delimiter = ',')]
        bits: Option<Vec<u32>>,
        /// Batch grid, comma separated
        #[arg(long, value_delimiter = ',')]
        batch: Option<Vec<u32>>,
        /// Pattern reuse table
        #[arg(long, value_parser = ["on", "off"])]
        prt: Option<String>,
    },
}

/// Defaults, then the config file, then flags.
fn settings(common: &CommonArgs) -> Result<Settings, String> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("reading config file {}: {e}", path.display()))?;
        apply_config_file(&mut s, &text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(seed) = common.seed {
        s.pipe.seed = seed;
    }
    Ok(s)
}

fn apply_shape(s: &mut Settings, shape: &ShapeArgs) -> Result<(), String> {
    if let Some(model) = &shape.model {
        s.model = model.clone();
    }
    if let Some(nbw) = shape.nbw {
        apply_key(s, "nbw", &nbw.to_string())?;
    }
    if let Some(bits) = shape.bits {
        apply_key(s, "bits", &bits.to_string())?;
    }
    if let Some(batch) = shape.batch {
        apply_key(s, "batch", &batch.to_string())?;
    }
    if let Some(prt) = &shape.prt {
        apply_key(s, "prt", prt)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::CheckGemv {
            common,
            cases,
            inject_fault,
        } => {
            let mut s = settings(&common).map_err(anyhow::Error::msg)?;
            if let Some(cases) = cases {
                s.cases = cases;
            }
            commands::check_gemv(&s, common.out.as_deref(), inject_fault)
        }
        Command::CheckTypeconv {
            common,
            samples,
            inject_fault,
        } => {
            let mut s = settings(&common).map_err(anyhow::Error::msg)?;
            if let Some(samples) = samples {
                s.samples = samples;
            }
            commands::check_typeconv(&s, common.out.as_deref(), inject_fault)
        }
        Command::Simulate {
            common,
            shape,
            trace,
        } => {
            let mut s = settings(&common).map_err(anyhow::Error::msg)?;
            apply_shape(&mut s, &shape).map_err(anyhow::Error::msg)?;
            if trace {
                s.trace = true;
            }
            commands::simulate(&s, common.out.as_deref())
        }
        Command::Sweep {
            common,
            model,
            nbw,
            bits,
            batch,
            prt,
        } => {
            let mut s = settings(&common).map_err(anyhow::Error::msg)?;
            if let Some(model) = model {
                s.model = model;
            }
            if let Some(nbw) = nbw {
                s.sweep_nbw = nbw;
            }
            if let Some(bits) = bits {
                s.sweep_bits = bits;
            }
            if let Some(batch) = batch {
                s.sweep_batch = batch;
            }
            if let Some(prt) = &prt {
                apply_key(&mut s, "prt", prt).map_err(anyhow::Error::msg)?;
            }
            commands::sweep_cmd(&s, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    // Restore default SIGPIPE so `lutsim ... | head` dies quietly instead
    // of panicking on the closed pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
