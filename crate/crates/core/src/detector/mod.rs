//! Simulated SSVEP-like bucket detector.
//!
//! The detector is nonlinear (see [`ResponseModel`]) and noisy (see
//! [`NoiseModel`]). Patterns are rescaled into the calibrated linear range
//! before projection, which keeps bucket energies an increasing, nearly
//! affine function of the pattern/object overlap.

mod calibration;
mod noise;
mod response;
mod spectrum;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::carve::Detector;
use crate::pattern::PatternError;

pub use calibration::{calibrate, rescale_bias, unmap_pattern, CalibrationConfig, CalibrationCurve};
pub use noise::{NoiseModel, SIGMA_RATIO};
pub use response::{ResponseAnchor, ResponseModel};
pub use spectrum::{
    extract_harmonics, synthesize_evoked, EvokedConfig, HarmonicEnergies, HARMONICS,
    MIN_SERIES_SECONDS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectorError {
    #[error("invalid response model: {0}")]
    Model(String),
    #[error("sample rate {rate} Hz is below the {needed} Hz needed for four harmonics")]
    Sampling { rate: f64, needed: f64 },
    #[error("series has {len} samples, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("pattern has {pattern} pixels, object has {object}")]
    Length { pattern: usize, object: usize },
    #[error(transparent)]
    Stimulus(#[from] PatternError),
}

/// Projected intensity reaching the detector: the object-weighted mean of the
/// rescaled pattern. A full-overlap pattern gives the top of the linear range.
pub fn projected_intensity(
    pattern: &[u8],
    object: &[u8],
    calib: &CalibrationCurve,
) -> Result<f64, DetectorError> {
    if pattern.len() != object.len() {
        return Err(DetectorError::Length { pattern: pattern.len(), object: object.len() });
    }
    if pattern.is_empty() {
        return Ok(0.0);
    }
    let projected = rescale_bias(pattern, calib)?;
    let light: f64 = projected.iter().zip(object).map(|(&p, &o)| p * f64::from(o)).sum();
    Ok(light / pattern.len() as f64)
}

/// One bucket value: overlap → projected intensity → mean energy at the
/// calibration frequency → one noise draw (if noise is on).
pub fn measure_bucket(
    pattern: &[u8],
    object: &[u8],
    model: &ResponseModel,
    noise: Option<&mut NoiseModel>,
    calib: &CalibrationCurve,
) -> Result<f64, DetectorError> {
    let intensity = projected_intensity(pattern, object, calib)?;
    let mean = model.energy(calib.frequency, intensity);
    Ok(match noise {
        Some(n) => n.draw(mean),
        None => mean,
    })
}

/// The simulated detector looking at one object stripe.
#[derive(Debug, Clone)]
pub struct SimulatedDetector {
    object: Vec<u8>,
    model: ResponseModel,
    noise: Option<NoiseModel>,
    calib: CalibrationCurve,
}

impl SimulatedDetector {
    pub fn new(
        object: Vec<u8>,
        model: ResponseModel,
        noise: Option<NoiseModel>,
        calib: CalibrationCurve,
    ) -> Self {
        Self { object, model, noise, calib }
    }

    pub fn calibration(&self) -> &CalibrationCurve {
        &self.calib
    }

    pub fn model(&self) -> &ResponseModel {
        &self.model
    }

    pub fn stimulus_level(&self, pattern: &[u8]) -> Result<f64, DetectorError> {
        projected_intensity(pattern, &self.object, &self.calib)
    }
}

impl Detector for SimulatedDetector {
    type Error = DetectorError;

    fn measure(&mut self, _column_id: usize, pattern: &[u8]) -> Result<f64, DetectorError> {
        measure_bucket(pattern, &self.object, &self.model, self.noise.as_mut(), &self.calib)
    }
}
