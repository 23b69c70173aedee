//! Core model of a near-cache LUT-GEMV accelerator: bit-plane SRAM
//! emulation, in-memory type conversion, grouped quantization, subset-sum
//! lookup kernels, a pattern reuse table, and the cycle accounting they
//! all share.

pub mod arch;
pub mod bitplane;
pub mod error;
pub mod ledger;
pub mod lutgemv;
pub mod pipeline;
pub mod prt;
pub mod quant;
pub mod typeconv;
pub mod verify;

pub use error::{Result, SimError};
pub use ledger::{ChargeCategory, CycleLedger};
pub use lutgemv::{GemvJob, GemvOutcome, LutTable};
pub use pipeline::{ModelSpec, PipelineConfig, RunOutcome};
pub use prt::{PatternReuseTable, PrtStats};
pub use quant::{QuantizedTensor, TensorKind};
