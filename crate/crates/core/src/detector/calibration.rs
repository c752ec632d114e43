use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DetectorError, NoiseModel, ResponseModel};

/// Intensity sweep settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub frequency: f64,
    /// Evenly spaced intensities over `[0, 1]`, endpoints included.
    pub levels: usize,
    /// Measurements averaged per level.
    pub repeats: usize,
    /// Seconds of flicker per measurement.
    pub dwell: f64,
    /// Seconds between measurements.
    pub pause: f64,
    /// Largest accepted max-residual of the line fit, relative to the fitted
    /// rise across the interval.
    pub tolerance: f64,
}

impl CalibrationConfig {
    pub fn new(frequency: f64) -> Self {
        Self { frequency, levels: 21, repeats: 200, dwell: 4.0, pause: 0.5, tolerance: 0.075 }
    }
}

/// Measured input/output curve with its linear range and the affine fit over
/// that range (`energy ≈ gain * intensity + bias`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub frequency: f64,
    pub samples: Vec<(f64, f64)>,
    pub linear_range: (f64, f64),
    pub gain: f64,
    pub bias: f64,
    /// Simulated time the sweep would take, seconds.
    pub simulated_time: f64,
}

/// Sweeps intensity, averages each level, and finds the longest prefix of
/// the curve a straight line fits within tolerance (never past the first
/// local maximum).
pub fn calibrate(
    model: &ResponseModel,
    mut noise: Option<&mut NoiseModel>,
    cfg: &CalibrationConfig,
) -> Result<CalibrationCurve, DetectorError> {
    model.validate()?;
    if cfg.levels < 8 {
        return Err(DetectorError::Calibration(format!("need at least 8 levels, got {}", cfg.levels)));
    }
    let repeats = cfg.repeats.max(1);
    let samples: Vec<(f64, f64)> = (0..cfg.levels)
        .map(|i| {
            let intensity = i as f64 / (cfg.levels - 1) as f64;
            let mean = model.energy(cfg.frequency, intensity);
            let avg = match noise.as_deref_mut() {
                Some(n) => (0..repeats).map(|_| n.draw(mean)).sum::<f64>() / repeats as f64,
                None => mean,
            };
            (intensity, avg)
        })
        .collect();

    let peak = samples
        .windows(2)
        .position(|w| w[1].1 <= w[0].1)
        .unwrap_or(samples.len() - 1);
    let mut best = None;
    for end in 2..=peak {
        let (gain, bias, rel) = fit(&samples[..=end]);
        if gain > 0.0 && rel <= cfg.tolerance {
            best = Some((end, gain, bias));
        } else {
            break;
        }
    }
    let (end, gain, bias) = best.ok_or_else(|| {
        DetectorError::Calibration(format!("no linear prefix at {} Hz", cfg.frequency))
    })?;
    let measurements = if noise.is_some() { repeats } else { 1 };
    Ok(CalibrationCurve {
        frequency: cfg.frequency,
        linear_range: (samples[0].0, samples[end].0),
        samples,
        gain,
        bias,
        simulated_time: (cfg.levels * measurements) as f64 * (cfg.dwell + cfg.pause),
    })
}

/// Least-squares line and its max residual relative to the fitted rise.
fn fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let gain = sxy / sxx;
    let bias = my - gain * mx;
    let rise = gain * (points[points.len() - 1].0 - points[0].0);
    let worst = points
        .iter()
        .map(|&(x, y)| (y - (gain * x + bias)).abs())
        .fold(0.0, f64::max);
    (gain, bias, worst / rise.abs())
}

impl CalibrationCurve {
    /// Energy at zero intensity.
    pub fn baseline(&self) -> f64 {
        self.samples[0].1
    }

    pub fn bias_level(&self) -> f64 {
        self.linear_range.0
    }

    pub fn span(&self) -> f64 {
        self.linear_range.1 - self.linear_range.0
    }

    fn check_range(&self) -> Result<(), DetectorError> {
        let span = self.span();
        if !(span.is_finite() && span > 0.0) {
            return Err(DetectorError::Calibration(format!(
                "degenerate linear range {:?}",
                self.linear_range
            )));
        }
        Ok(())
    }

    /// Samples inside the linear range, if they are strictly increasing.
    fn monotone_range(&self) -> Option<Vec<(f64, f64)>> {
        let in_range: Vec<(f64, f64)> = self
            .samples
            .iter()
            .copied()
            .filter(|s| s.0 <= self.linear_range.1)
            .collect();
        (in_range.len() >= 2 && in_range.windows(2).all(|w| w[1].1 > w[0].1)).then_some(in_range)
    }

    /// Intensity that produced `energy`: piecewise-linear inverse of the
    /// measured curve inside the linear range, the affine fit outside it (or
    /// everywhere if the measured samples are not strictly increasing).
    pub fn intensity_for(&self, energy: f64) -> f64 {
        let Some(pts) = self.monotone_range() else {
            return (energy - self.bias) / self.gain;
        };
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if energy < first.1 {
            return first.0 + (energy - first.1) / self.gain;
        }
        if energy > last.1 {
            return last.0 + (energy - last.1) / self.gain;
        }
        let w = pts.windows(2).find(|w| energy <= w[1].1).expect("energy inside the sampled span");
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        x0 + (energy - y0) * (x1 - x0) / (y1 - y0)
    }

    /// Forward of [`intensity_for`](Self::intensity_for).
    pub fn energy_for(&self, intensity: f64) -> f64 {
        let Some(pts) = self.monotone_range() else {
            return self.bias + self.gain * intensity;
        };
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if intensity < first.0 {
            return first.1 + (intensity - first.0) * self.gain;
        }
        if intensity > last.0 {
            return last.1 + (intensity - last.0) * self.gain;
        }
        let w = pts.windows(2).find(|w| intensity <= w[1].0).expect("intensity inside the sampled span");
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        y0 + (intensity - x0) * (y1 - y0) / (x1 - x0)
    }
}

/// Maps a binary pattern into the linear range: 0 → bias level,
/// 1 → bias level + span.
pub fn rescale_bias(pattern: &[u8], calib: &CalibrationCurve) -> Result<Vec<f64>, DetectorError> {
    calib.check_range()?;
    let (lo, span) = (calib.bias_level(), calib.span());
    Ok(pattern.iter().map(|&p| lo + span * f64::from(p)).collect())
}

/// Inverse of [`rescale_bias`].
pub fn unmap_pattern(projected: &[f64], calib: &CalibrationCurve) -> Result<Vec<u8>, DetectorError> {
    calib.check_range()?;
    let (lo, span) = (calib.bias_level(), calib.span());
    projected
        .iter()
        .map(|&v| {
            let t = (v - lo) / span;
            if (t - 0.0).abs() < 1e-9 {
                Ok(0)
            } else if (t - 1.0).abs() < 1e-9 {
                Ok(1)
            } else {
                Err(DetectorError::Calibration(format!("{v} is not a projected level")))
            }
        })
        .collect()
}
