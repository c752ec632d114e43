use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PatternError;

/// Lowest flicker frequency in the operating band, Hz.
pub const MIN_FLICKER_HZ: f64 = 3.0;

// Guards frame-boundary comparisons against float noise in `j * f / F`.
const PHASE_EPS: f64 = 1e-9;

/// Square-wave flicker of a uniform patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    /// Amplitude of the "on" phase.
    pub intensity: f64,
    /// Flicker frequency, Hz.
    pub frequency: f64,
    /// Fraction of each period spent "on".
    pub duty: f64,
    /// Display frame rate, frames per second.
    pub frame_rate: f64,
    /// Seconds.
    pub duration: f64,
}

impl StimulusSpec {
    pub fn new(intensity: f64, frequency: f64, duration: f64) -> Self {
        Self { intensity, frequency, duty: 0.5, frame_rate: 60.0, duration }
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let bad = |msg| Err(PatternError::Stimulus(msg));
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return bad(format!("frame rate {} must be positive", self.frame_rate));
        }
        if !(self.frequency >= MIN_FLICKER_HZ && self.frequency < self.frame_rate / 2.0) {
            return bad(format!(
                "flicker {} Hz outside [{MIN_FLICKER_HZ}, {}) Hz",
                self.frequency,
                self.frame_rate / 2.0
            ));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return bad(format!("duty {} outside (0, 1)", self.duty));
        }
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return bad(format!("intensity {} must be non-negative", self.intensity));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad(format!("duration {} must be non-negative", self.duration));
        }
        Ok(())
    }

    /// Number of frames, `floor(duration * frame_rate)`.
    pub fn frame_count(&self) -> usize {
        libm::floor(self.duration * self.frame_rate + PHASE_EPS) as usize
    }

    /// Whether the square wave is in its high phase at frame `j`.
    pub fn is_on(&self, frame: usize) -> bool {
        let cycles = frame as f64 * self.frequency / self.frame_rate;
        let phase = cycles - libm::floor(cycles + PHASE_EPS);
        phase + PHASE_EPS < self.duty
    }
}

/// Per-frame intensities `A * Square(2π f j / F_rate, duty)`.
pub fn stimulus_frames(spec: &StimulusSpec) -> Result<Vec<f64>, PatternError> {
    spec.validate()?;
    Ok((0..spec.frame_count())
        .map(|j| if spec.is_on(j) { spec.intensity } else { 0.0 })
        .collect())
}
