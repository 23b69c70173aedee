//! Crate-wide error type. Every fallible operation returns [`SimError`];
//! variants carry enough context to state which contract was violated.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("row {row} out of range for a {rows}-row array")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("column {col} out of range for a {cols}-column array")]
    ColumnOutOfRange { col: usize, cols: usize },

    #[error("operand width {n} outside supported range {min}..={max}")]
    WidthOutOfRange { n: usize, min: usize, max: usize },

    #[error("row regions [{a_base}, +{a_len}) and [{b_base}, +{b_len}) overlap")]
    RegionOverlap {
        a_base: usize,
        a_len: usize,
        b_base: usize,
        b_len: usize,
    },

    #[error("geometry mismatch: {what}")]
    GeometryMismatch { what: String },

    #[error("value is NaN or infinite")]
    NotFinite,

    #[error("bit width {bits} unsupported (expected one of 2, 3, 4, 5, 6, 8)")]
    UnsupportedBitWidth { bits: u32 },

    #[error("code {code} does not fit in {bits} bits")]
    CodeOutOfRange { code: i64, bits: u32 },

    #[error("group size must be nonzero")]
    ZeroGroupSize,

    #[error("tensor fixture: bad magic")]
    BadMagic,

    #[error("tensor fixture: unsupported version {version}")]
    BadVersion { version: u16 },

    #[error("tensor fixture: {what}")]
    MalformedFixture { what: String },

    #[error("basis count {nbw} outside supported range 1..=4")]
    InvalidNbw { nbw: u32 },

    #[error(
        "lookup table of 2^{nbw} entries x {entry_width} bits exceeds {rows} array rows"
    )]
    LutCapacity {
        nbw: u32,
        entry_width: u32,
        rows: usize,
    },

    #[error("pattern {pattern:#b} out of range for {nbw} basis weights")]
    PatternOutOfRange { pattern: u32, nbw: u32 },

    #[error("quantization level {ql} is not an encodable width")]
    InvalidQl { ql: u32 },

    #[error("opcode {opcode:#04x} is not a lutmm instruction")]
    ReservedOpcode { opcode: u32 },

    #[error("field {field} value {value} exceeds maximum {max}")]
    FieldOverflow {
        field: &'static str,
        value: u32,
        max: u32,
    },

    #[error("tile index {loc} out of range for scale {sc} ({tiles} tiles)")]
    LocOutOfRange { loc: u32, sc: u32, tiles: u32 },

    #[error("memory access [{addr:#x}, +{len}) beyond mapped {size} bytes")]
    UnmappedAddress { addr: u64, len: usize, size: usize },

    #[error(
        "accumulator magnitude in column {col} needs {needed} bits; exact conversion covers {limit}"
    )]
    AccumulatorRange { col: usize, needed: u32, limit: u32 },

    #[error("empty ledger: no cycles charged")]
    EmptyLedger,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
