//! Evoked-response time series and harmonic energy read-out.
//!
//! Spectral magnitudes are unnormalized (`|X|`): a sine of amplitude `a` over
//! `L` samples reads `a * L / 2`. The read-out applies a Hann window (with its
//! coherent gain of 1/2 compensated) and evaluates the transform on a grid
//! eight times finer than the bin spacing, so tones between bins are not
//! under-read by scalloping.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DetectorError, ResponseModel};
use crate::pattern::StimulusSpec;

/// Harmonics read out: fundamental plus three overtones.
pub const HARMONICS: usize = 4;
/// Shortest series accepted by [`extract_harmonics`], seconds.
pub const MIN_SERIES_SECONDS: f64 = 2.0;
/// Frequency-grid refinement relative to the DFT bin spacing.
const OVERSAMPLE: usize = 8;
/// Half-width of the search window around each harmonic, in DFT bins.
const WINDOW_BINS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvokedConfig {
    /// Samples per second.
    pub sample_rate: f64,
    /// Standard deviation of the additive white background, per sample.
    pub background_std: f64,
    /// Seeds the harmonic phases and the background.
    pub seed: u64,
}

impl EvokedConfig {
    pub fn new(sample_rate: f64, seed: u64) -> Self {
        Self { sample_rate, background_std: 0.0, seed }
    }

    /// Background whose spectral magnitude has RMS `level` (energy units)
    /// for a series of `len` samples.
    pub fn with_background_level(mut self, level: f64, len: usize) -> Self {
        // Hann with gain compensation: E|X|^2 = 4 * sigma^2 * sum(w^2) = 1.5 L sigma^2
        self.background_std = level / libm::sqrt(1.5 * len as f64);
        self
    }
}

/// Synthesizes the evoked response to a flicker stimulus:
/// `sum_k a_k sin(2π k f t + φ_k)` for `k = 1..4`, with amplitudes chosen so
/// the harmonic read-out sums to `mu(f, A)`, plus white background.
///
/// `stim.intensity` is the normalized input intensity in `[0, 1]`.
pub fn synthesize_evoked(
    stim: &StimulusSpec,
    model: &ResponseModel,
    cfg: &EvokedConfig,
) -> Result<Vec<f64>, DetectorError> {
    stim.validate()?;
    model.validate()?;
    let needed = 4.0 * HARMONICS as f64 * stim.frequency;
    if cfg.sample_rate < needed {
        return Err(DetectorError::Sampling { rate: cfg.sample_rate, needed });
    }
    let len = libm::floor(stim.duration * cfg.sample_rate + 1e-9) as usize;
    if len == 0 {
        return Ok(Vec::new());
    }
    let energies = model.harmonic_energies(stim.frequency, stim.intensity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phases: [f64; HARMONICS] = core::array::from_fn(|_| rng.random::<f64>() * TAU);
    let amplitudes = energies.map(|e| 2.0 * e / len as f64);
    let series = (0..len)
        .map(|n| {
            let t = n as f64 / cfg.sample_rate;
            let tone: f64 = (0..HARMONICS)
                .map(|k| {
                    let w = TAU * (k + 1) as f64 * stim.frequency;
                    amplitudes[k] * libm::sin(w * t + phases[k])
                })
                .sum();
            let bg = if cfg.background_std > 0.0 {
                cfg.background_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            tone + bg
        })
        .collect();
    Ok(series)
}

/// Peak magnitudes near `k * f` for `k = 1..4` and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEnergies {
    /// `None` when the search window crosses the Nyquist frequency.
    pub harmonics: [Option<f64>; HARMONICS],
    pub total: f64,
}

impl HarmonicEnergies {
    pub fn get(&self, k: usize) -> Option<f64> {
        self.harmonics.get(k.wrapping_sub(1)).copied().flatten()
    }
}

pub fn extract_harmonics(
    series: &[f64],
    freq: f64,
    sample_rate: f64,
) -> Result<HarmonicEnergies, DetectorError> {
    let needed = libm::ceil(MIN_SERIES_SECONDS * sample_rate - 1e-9) as usize;
    if series.len() < needed {
        return Err(DetectorError::SeriesTooShort { len: series.len(), needed });
    }
    let len = series.len();
    let windowed: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(n, &x)| x * 2.0 * hann(n, len))
        .collect();
    let bin = sample_rate / len as f64;
    let half = WINDOW_BINS as f64 * bin;
    let step = bin / OVERSAMPLE as f64;
    let nyquist = sample_rate / 2.0;
    let mut harmonics = [None; HARMONICS];
    for (k, slot) in harmonics.iter_mut().enumerate() {
        let centre = (k + 1) as f64 * freq;
        if centre + half >= nyquist {
            continue;
        }
        let points = 2 * WINDOW_BINS * OVERSAMPLE;
        let peak = (0..=points)
            .map(|i| dtft_magnitude(&windowed, centre - half + i as f64 * step, sample_rate))
            .fold(0.0, f64::max);
        *slot = Some(peak);
    }
    let total = harmonics.iter().flatten().sum();
    Ok(HarmonicEnergies { harmonics, total })
}

fn hann(n: usize, len: usize) -> f64 {
    0.5 - 0.5 * libm::cos(TAU * n as f64 / len as f64)
}

/// `|sum_n x[n] e^{-i 2π ν n / fs}|` by phasor rotation.
fn dtft_magnitude(x: &[f64], freq: f64, sample_rate: f64) -> f64 {
    let theta = -TAU * freq / sample_rate;
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let (mut re, mut im) = (0.0, 0.0);
    let (mut pr, mut pi) = (1.0f64, 0.0f64);
    for (n, &v) in x.iter().enumerate() {
        re += v * pr;
        im += v * pi;
        (pr, pi) = (pr * c - pi * s, pr * s + pi * c);
        // renormalize the phasor now and then against drift
        if n % 256 == 255 {
            let norm = libm::sqrt(pr * pr + pi * pi);
            pr /= norm;
            pi /= norm;
        }
    }
    libm::sqrt(re * re + im * im)
}
