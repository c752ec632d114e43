//! Simulated acquisition time.
//!
//! Per-pattern dwell grows linearly with the pixels sharing one bucket, which
//! keeps the per-measurement SNR fixed: unsegmented imaging costs `T ∝ N²`,
//! stripe scanning over `q` segments `T ∝ N²/q`.

/// Pixel count at which the dwell is used unscaled (one 16-pixel stripe).
pub const REFERENCE_PIXELS: usize = 16;

/// Seconds spent on a single pattern.
pub fn pattern_time(dwell: f64, pause: f64, pixels: usize, reference: usize) -> f64 {
    dwell * pixels as f64 / reference as f64 + pause
}

/// `patterns × (dwell · N / N_ref + pause)` seconds.
pub fn acquisition_time(patterns: usize, dwell: f64, pause: f64, pixels: usize, reference: usize) -> f64 {
    patterns as f64 * pattern_time(dwell, pause, pixels, reference)
}
