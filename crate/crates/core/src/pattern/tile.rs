use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PatternError;

/// Macro-pixel ("tile") modulation of a binary projector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileSpec {
    /// Sub-pixels per tile side.
    pub tile_side: usize,
    /// Fraction of sub-pixels switched on in a lit tile.
    pub on_fraction: f64,
    pub seed: u64,
}

impl Default for TileSpec {
    fn default() -> Self {
        Self { tile_side: 32, on_fraction: 1.0, seed: 0 }
    }
}

impl TileSpec {
    /// Distinct gray levels a single tile can show.
    pub fn levels(&self) -> usize {
        self.tile_side * self.tile_side + 1
    }

    /// Lit sub-pixels for fraction `p`: `round(p * side^2)`.
    pub fn lit_count(&self, p: f64) -> usize {
        let area = self.tile_side * self.tile_side;
        (libm::round(p * area as f64) as usize).min(area)
    }
}

/// Single-bit frame, row-major, one byte (0 or 1) per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Bitmap {
    pub fn count_on(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Renders a pattern over a macro grid `grid_width` tiles wide, lighting
/// `tile.on_fraction` of every lit tile.
pub fn render_tile_frame(
    pattern: &[u8],
    grid_width: usize,
    tile: &TileSpec,
) -> Result<Bitmap, PatternError> {
    let fractions = vec![tile.on_fraction; pattern.len()];
    render_tile_frame_levels(pattern, &fractions, grid_width, tile)
}

/// Like [`render_tile_frame`] with an individual on-fraction per macro-pixel.
///
/// Sub-pixel positions are a seeded uniform sample without replacement, drawn
/// tile by tile in row-major order, so a fixed seed gives a fixed frame.
pub fn render_tile_frame_levels(
    pattern: &[u8],
    fractions: &[f64],
    grid_width: usize,
    tile: &TileSpec,
) -> Result<Bitmap, PatternError> {
    if grid_width == 0 || !pattern.len().is_multiple_of(grid_width) {
        return Err(PatternError::Tile(format!(
            "{} macro-pixels do not fill rows of {grid_width}",
            pattern.len()
        )));
    }
    if fractions.len() != pattern.len() {
        return Err(PatternError::Tile(format!(
            "{} fractions for {} macro-pixels",
            fractions.len(),
            pattern.len()
        )));
    }
    if let Some(p) = fractions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(PatternError::Tile(format!("fraction {p} outside [0, 1]")));
    }
    let side = tile.tile_side;
    let grid_height = pattern.len() / grid_width;
    let width = grid_width * side;
    let mut data = vec![0u8; width * grid_height * side];
    let mut rng = ChaCha8Rng::seed_from_u64(tile.seed);
    for (cell, (&lit, &p)) in pattern.iter().zip(fractions).enumerate() {
        if lit == 0 {
            continue;
        }
        let (gx, gy) = (cell % grid_width, cell / grid_width);
        for sub in index::sample(&mut rng, side * side, tile.lit_count(p)) {
            let (sx, sy) = (sub % side, sub / side);
            data[(gy * side + sy) * width + gx * side + sx] = 1;
        }
    }
    Ok(Bitmap { width, height: grid_height * side, data })
}
