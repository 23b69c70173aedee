//! Tile-to-array weight distribution. RowSplit spreads each weight row
//! across arrays (every array sees a slice of every row, accumulating its
//! own output columns). ColumnSplit spreads each column across arrays, the
//! layout used for transposed KV-cache matrices where arrays hold disjoint
//! row bands and their partial sums are merged by the adder tree.

use crate::error::{Result, SimError};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingMode {
    RowSplit,
    ColumnSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && i < self.end()
    }
}

/// Contiguous even split of 0..total into `parts` spans, remainder spread
/// one extra element each over the first spans.
pub fn split_even(total: usize, parts: usize) -> Vec<Span> {
    assert!(parts > 0);
    let base = total / parts;
    let extra = total % parts;
    let mut spans = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        spans.push(Span { start, len });
        start += len;
    }
    spans
}

#[derive(Debug, Clone)]
pub struct TileAssignment {
    pub mode: MappingMode,
    pub rows: usize,
    pub cols: usize,
    /// Per array: the column span (RowSplit) or row span (ColumnSplit) it owns.
    pub spans: Vec<Span>,
}

impl TileAssignment {
    /// Array owning element (row, col).
    pub fn array_of(&self, row: usize, col: usize) -> usize {
        let i = match self.mode {
            MappingMode::RowSplit => col,
            MappingMode::ColumnSplit => row,
        };
        self.spans
            .iter()
            .position(|s| s.contains(i))
            .expect("assignment is total")
    }

    /// The elements array `a` holds, as (row range, col range).
    pub fn array_region(&self, a: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let s = self.spans[a];
        match self.mode {
            MappingMode::RowSplit => (0..self.rows, s.start..s.end()),
            MappingMode::ColumnSplit => (s.start..s.end(), 0..self.cols),
        }
    }
}

/// Distribute a rows×cols tile over `arrays` arrays.
pub fn map_tile(rows: usize, cols: usize, arrays: usize, mode: MappingMode) -> Result<TileAssignment> {
    if rows == 0 || cols == 0 || arrays == 0 {
        return Err(SimError::GeometryMismatch {
            what: format!("map_tile({rows}x{cols}) over {arrays} arrays"),
        });
    }
    let spans = match mode {
        MappingMode::RowSplit => split_even(cols, arrays),
        MappingMode::ColumnSplit => split_even(rows, arrays),
    };
    Ok(TileAssignment {
        mode,
        rows,
        cols,
        spans,
    })
}
