use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Response parameters at one flicker frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseAnchor {
    pub freq_hz: f64,
    /// Evoked energy per unit intensity near zero intensity.
    pub gain: f64,
    /// Intensity of the response maximum; `inf` gives a linear response.
    pub saturation: f64,
}

/// Mean evoked energy as a function of flicker frequency and normalized
/// input intensity:
///
/// ```text
/// mu(f, I) = mu0 + gain(f) * I / (1 + (I / saturation(f))^2)
/// ```
///
/// `gain` and `saturation` are interpolated linearly between anchors and
/// held constant outside them. The curve rises strictly on
/// `[0, saturation]` and falls beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    /// Energy with no illumination.
    pub mu0: f64,
    /// Split of the total energy over the first four harmonics.
    pub harmonic_weights: [f64; 4],
    pub anchors: Vec<ResponseAnchor>,
}

impl Default for ResponseModel {
    /// Two usable operating points: 15 Hz rises over the whole range, 6 Hz
    /// peaks just above half range.
    fn default() -> Self {
        let anchor = |freq_hz, gain, saturation| ResponseAnchor { freq_hz, gain, saturation };
        Self {
            mu0: 2e-4,
            harmonic_weights: [0.5, 0.25, 0.15, 0.10],
            anchors: vec![
                anchor(3.0, 0.06, 0.45),
                anchor(6.0, 0.2, 0.55),
                anchor(10.0, 0.08, 1.0),
                anchor(15.0, 0.2, 3.0),
                anchor(20.0, 0.1, 1.5),
                anchor(30.0, 0.04, 1.0),
            ],
        }
    }
}

impl ResponseModel {
    /// `mu = mu0 + slope * I` at every frequency.
    pub fn linear(mu0: f64, slope: f64) -> Self {
        Self {
            mu0,
            harmonic_weights: [0.5, 0.25, 0.15, 0.10],
            anchors: vec![ResponseAnchor { freq_hz: 6.0, gain: slope, saturation: f64::INFINITY }],
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |msg: alloc::string::String| Err(DetectorError::Model(msg));
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        if self.harmonic_weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("harmonic weights must be non-negative".into());
        }
        let sum: f64 = self.harmonic_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("harmonic weights sum to {sum}, expected 1"));
        }
        if self.anchors.is_empty() {
            return bad("at least one anchor is required".into());
        }
        if self.anchors.windows(2).any(|w| !(w[0].freq_hz < w[1].freq_hz)) {
            return bad("anchor frequencies must be strictly ascending".into());
        }
        for a in &self.anchors {
            if !(a.gain.is_finite() && a.gain >= 0.0) || !(a.saturation > 0.0) {
                return bad(format!("anchor at {} Hz has invalid gain/saturation", a.freq_hz));
            }
        }
        Ok(())
    }

    /// `(gain, saturation)` at `freq`.
    pub fn params_at(&self, freq: f64) -> (f64, f64) {
        let first = self.anchors[0];
        let last = self.anchors[self.anchors.len() - 1];
        if freq <= first.freq_hz {
            return (first.gain, first.saturation);
        }
        if freq >= last.freq_hz {
            return (last.gain, last.saturation);
        }
        let i = self.anchors.iter().position(|a| a.freq_hz > freq).unwrap_or(1);
        let (a, b) = (self.anchors[i - 1], self.anchors[i]);
        let t = (freq - a.freq_hz) / (b.freq_hz - a.freq_hz);
        (lerp(a.gain, b.gain, t), lerp(a.saturation, b.saturation, t))
    }

    /// Mean total energy for normalized intensity `intensity` at `freq`.
    pub fn energy(&self, freq: f64, intensity: f64) -> f64 {
        let (gain, sat) = self.params_at(freq);
        let r = intensity / sat;
        self.mu0 + gain * intensity / (1.0 + r * r)
    }

    /// Mean energy per harmonic.
    pub fn harmonic_energies(&self, freq: f64, intensity: f64) -> [f64; 4] {
        let total = self.energy(freq, intensity);
        self.harmonic_weights.map(|w| w * total)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        a
    } else {
        a + t * (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ResponseModel::default().validate().unwrap();
    }

    #[test]
    fn baseline_at_zero_intensity() {
        let m = ResponseModel::default();
        for f in [3.0, 6.0, 7.5, 15.0, 29.0] {
            assert_eq!(m.energy(f, 0.0), m.mu0);
        }
    }

    #[test]
    fn fifteen_hz_rises_everywhere() {
        let m = ResponseModel::default();
        for i in 0..100 {
            let (a, b) = (i as f64 / 100.0, (i + 1) as f64 / 100.0);
            assert!(m.energy(15.0, b) > m.energy(15.0, a));
        }
    }

    #[test]
    fn six_hz_rises_then_falls() {
        let m = ResponseModel::default();
        for i in 0..50 {
            let (a, b) = (i as f64 / 100.0, (i + 1) as f64 / 100.0);
            assert!(m.energy(6.0, b) > m.energy(6.0, a), "I={a}");
        }
        assert!(m.energy(6.0, 1.0) < m.energy(6.0, 0.6));
    }

    #[test]
    fn linear_toy() {
        let m = ResponseModel::linear(0.1, 1.0);
        m.validate().unwrap();
        assert_eq!(m.energy(9.0, 0.25), 0.35);
    }

    #[test]
    fn invalid_models() {
        let mut m = ResponseModel::default();
        m.mu0 = 0.0;
        assert!(m.validate().is_err());
        let mut m = ResponseModel::default();
        m.harmonic_weights = [0.5, 0.5, 0.5, 0.0];
        assert!(m.validate().is_err());
        let mut m = ResponseModel::default();
        m.anchors.swap(0, 1);
        assert!(m.validate().is_err());
    }

    #[test]
    fn interpolation_between_anchors() {
        let m = ResponseModel::default();
        let (g, s) = m.params_at(8.0);
        assert!((g - 0.14).abs() < 1e-12);
        assert!((s - 0.775).abs() < 1e-12);
        assert_eq!(m.params_at(1.0), (0.06, 0.45));
        assert_eq!(m.params_at(40.0), (0.04, 1.0));
    }
}
