//! Illumination pattern generation.
//!
//! Patterns are stored column-wise: every column of a [`PatternMatrix`] is one
//! binary illumination pattern, every row one pixel of the illuminated stripe.
//! Original Hadamard column and pixel indices are zero-based throughout.

mod scan;
mod stimulus;
mod tile;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scan::{make_scan_plan, ScanPlan};
pub use stimulus::{stimulus_frames, StimulusSpec};
pub use tile::{render_tile_frame, render_tile_frame_levels, Bitmap, TileSpec};

/// Largest Hadamard order accepted by [`hadamard`] (4096 × 4096 entries).
pub const MAX_ORDER: u32 = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("hadamard order {order} exceeds the limit of {max}")]
    SizeLimit { order: u32, max: u32 },
    #[error("invalid stimulus: {0}")]
    Stimulus(String),
    #[error("scan plan needs power-of-two dimensions, got {width}x{height}")]
    Plan { width: usize, height: usize },
    #[error("invalid pattern matrix: {0}")]
    Matrix(String),
    #[error("tile rendering: {0}")]
    Tile(String),
}

/// Sylvester Hadamard matrix with entries in {-1, +1}, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HadamardMatrix {
    order: u32,
    entries: Vec<i8>,
}

impl HadamardMatrix {
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Side length `2^order`.
    pub fn size(&self) -> usize {
        1 << self.order
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.size() + col]
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn column(&self, col: usize) -> Vec<i8> {
        (0..self.size()).map(|r| self.get(r, col)).collect()
    }
}

/// Closed form of the Sylvester construction: `(-1)^popcount(row & col)`.
pub fn sylvester_entry(row: usize, col: usize) -> i8 {
    if (row & col).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Builds the `2^m × 2^m` Sylvester Hadamard matrix by the doubling recursion
/// `H_m = [[H, H], [H, -H]]`, `H_0 = [1]`. The `1/√2` normalization is dropped
/// so entries stay exact integers.
pub fn hadamard(m: u32) -> Result<HadamardMatrix, PatternError> {
    if m > MAX_ORDER {
        return Err(PatternError::SizeLimit { order: m, max: MAX_ORDER });
    }
    let mut entries = vec![1i8];
    let mut size = 1usize;
    for _ in 0..m {
        let next = size * 2;
        let mut grown = vec![0i8; next * next];
        for r in 0..size {
            for c in 0..size {
                let v = entries[r * size + c];
                grown[r * next + c] = v;
                grown[r * next + c + size] = v;
                grown[(r + size) * next + c] = v;
                grown[(r + size) * next + c + size] = -v;
            }
        }
        entries = grown;
        size = next;
    }
    Ok(HadamardMatrix { order: m, entries })
}

/// Replaces every `-1` by `0`: the projectable 0/1 pattern set.
pub fn binarize(h: &HadamardMatrix) -> PatternMatrix {
    let n = h.size();
    PatternMatrix {
        entries: h.entries.iter().map(|&v| u8::from(v > 0)).collect(),
        row_ids: (0..n).collect(),
        column_ids: (0..n).collect(),
    }
}

/// A set of binary patterns (columns) over a set of retained pixels (rows).
///
/// `row_ids` and `column_ids` record which original pixel and Hadamard column
/// each row/column came from, so carving history survives the reductions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternMatrix {
    entries: Vec<u8>,
    row_ids: Vec<usize>,
    column_ids: Vec<usize>,
}

impl PatternMatrix {
    /// Row-major constructor; validates binary entries and id invariants.
    pub fn new(
        entries: Vec<u8>,
        row_ids: Vec<usize>,
        column_ids: Vec<usize>,
    ) -> Result<Self, PatternError> {
        if entries.len() != row_ids.len() * column_ids.len() {
            return Err(PatternError::Matrix(alloc::format!(
                "{} entries for {}x{} matrix",
                entries.len(),
                row_ids.len(),
                column_ids.len()
            )));
        }
        if entries.iter().any(|&v| v > 1) {
            return Err(PatternError::Matrix("entries must be 0 or 1".into()));
        }
        if row_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PatternError::Matrix("row ids must be strictly ascending".into()));
        }
        let mut sorted = column_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(PatternError::Matrix("column ids must be unique".into()));
        }
        Ok(Self { entries, row_ids, column_ids })
    }

    /// The binarized Sylvester sub-matrix picked out by the given ids.
    pub fn from_hadamard_ids(
        row_ids: Vec<usize>,
        column_ids: Vec<usize>,
    ) -> Result<Self, PatternError> {
        let entries = row_ids
            .iter()
            .flat_map(|&r| column_ids.iter().map(move |&c| u8::from(sylvester_entry(r, c) > 0)))
            .collect();
        Self::new(entries, row_ids, column_ids)
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.column_ids.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.cols() + col]
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn column_ids(&self) -> &[usize] {
        &self.column_ids
    }

    /// Local index of an original column id.
    pub fn column_index(&self, column_id: usize) -> Option<usize> {
        self.column_ids.iter().position(|&c| c == column_id)
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        (0..self.rows()).map(|r| self.get(r, col)).collect()
    }

    /// Column `col` laid out over `n` original pixels, dark outside `row_ids`.
    pub fn scatter_column(&self, col: usize, n: usize) -> Vec<u8> {
        let mut full = vec![0u8; n];
        for (r, &pixel) in self.row_ids.iter().enumerate() {
            full[pixel] = self.get(r, col);
        }
        full
    }

    /// Keeps the rows at the given local indices (must be ascending).
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let cols = self.cols();
        let mut entries = Vec::with_capacity(keep.len() * cols);
        for &r in keep {
            entries.extend_from_slice(&self.entries[r * cols..(r + 1) * cols]);
        }
        Self {
            entries,
            row_ids: keep.iter().map(|&r| self.row_ids[r]).collect(),
            column_ids: self.column_ids.clone(),
        }
    }

    /// Keeps the columns at the given local indices, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(self.rows() * keep.len());
        for r in 0..self.rows() {
            entries.extend(keep.iter().map(|&c| self.get(r, c)));
        }
        Self {
            entries,
            row_ids: self.row_ids.clone(),
            column_ids: keep.iter().map(|&c| self.column_ids[c]).collect(),
        }
    }

    /// Plain-text export: one matrix row per line, space separated 0/1.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 2);
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.get(r, c));
            }
            out.push('\n');
        }
        out
    }
}
