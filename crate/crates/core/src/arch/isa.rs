//! The lutmm_1k custom instruction: one 32-bit word launching a
//! [1,1024]×[1024,1024·2^sc] tile GEMV.
//!
//! Word layout (LSB first):
//!   [6:0]   opcode    0x0B
//!   [11:7]  rd        result base-address register
//!   [14:12] ql        quantization level code ({2,3,4,5,6,8} → 0..5)
//!   [19:15] rw        weight base-address register
//!   [24:20] ri        input base-address register
//!   [27:25] sc        scale exponent, matrix width = 1024·2^sc
//!   [31:28] loc       tile index within the row, loc < 2^sc

use crate::error::{Result, SimError};

pub const LUTMM_OPCODE: u32 = 0x0B;
/// Output columns covered by one tile.
pub const TILE_N: usize = 1024;
pub const QL_LEVELS: [u32; 6] = [2, 3, 4, 5, 6, 8];

pub fn ql_to_code(ql: u32) -> Result<u32> {
    QL_LEVELS
        .iter()
        .position(|&q| q == ql)
        .map(|p| p as u32)
        .ok_or(SimError::InvalidQl { ql })
}

pub fn code_to_ql(code: u32) -> Result<u32> {
    QL_LEVELS
        .get(code as usize)
        .copied()
        .ok_or(SimError::InvalidQl { ql: code })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LutmmInstruction {
    pub rd: u8,
    /// Weight quantization level in bits, one of QL_LEVELS.
    pub ql: u32,
    pub rw: u8,
    pub ri: u8,
    pub sc: u8,
    pub loc: u8,
}

impl LutmmInstruction {
    pub fn validate(&self) -> Result<()> {
        ql_to_code(self.ql)?;
        for (field, value, max) in [
            ("rd", self.rd as u32, 31),
            ("rw", self.rw as u32, 31),
            ("ri", self.ri as u32, 31),
            ("sc", self.sc as u32, 7),
            ("loc", self.loc as u32, 15),
        ] {
            if value > max {
                return Err(SimError::FieldOverflow { field, value, max });
            }
        }
        let tiles = 1u32 << self.sc;
        if self.loc as u32 >= tiles {
            return Err(SimError::LocOutOfRange {
                loc: self.loc as u32,
                sc: self.sc as u32,
                tiles,
            });
        }
        Ok(())
    }

    /// Tiles in the full matrix width for this sc.
    pub fn tiles(&self) -> u32 {
        1 << self.sc
    }

    /// Full matrix width in columns.
    pub fn matrix_width(&self) -> usize {
        TILE_N << self.sc
    }

    pub fn encode(&self) -> Result<u32> {
        self.validate()?;
        Ok(LUTMM_OPCODE
            | (self.rd as u32) << 7
            | ql_to_code(self.ql)? << 12
            | (self.rw as u32) << 15
            | (self.ri as u32) << 20
            | (self.sc as u32) << 25
            | (self.loc as u32) << 28)
    }

    pub fn decode(word: u32) -> Result<Self> {
        let opcode = word & 0x7F;
        if opcode != LUTMM_OPCODE {
            return Err(SimError::ReservedOpcode { opcode });
        }
        let instr = Self {
            rd: (word >> 7 & 0x1F) as u8,
            ql: code_to_ql(word >> 12 & 0x7)?,
            rw: (word >> 15 & 0x1F) as u8,
            ri: (word >> 20 & 0x1F) as u8,
            sc: (word >> 25 & 0x7) as u8,
            loc: (word >> 28 & 0xF) as u8,
        };
        instr.validate()?;
        Ok(instr)
    }
}

/// Output-column interval [loc·1024, (loc+1)·1024) of tile `loc`.
pub fn tile_columns(loc: u8, sc: u8) -> Result<std::ops::Range<usize>> {
    let tiles = 1u32 << sc;
    if sc > 7 || (loc as u32) >= tiles {
        return Err(SimError::LocOutOfRange {
            loc: loc as u32,
            sc: sc as u32,
            tiles,
        });
    }
    let start = loc as usize * TILE_N;
    Ok(start..start + TILE_N)
}
