//! Batch experiments: per-stripe adaptive acquisition, an optional full-basis
//! pass for standard GI, reconstruction and artifact output.
//!
//! Reconstructions are always rebuilt from the recorded events, so a live run
//! and a replay of its log go through the same code.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use ghostcarve_core::carve::AcquireFailure;
use ghostcarve_core::detector::{calibrate, projected_intensity, NoiseModel};
use ghostcarve_core::reconstruct::{
    gi_correlation, normalize_min_max, reconstruct_carved, ssim, ReconstructError, Reconstruction,
};
use ghostcarve_core::{
    adaptive_acquire, assemble, binarize, hadamard, make_scan_plan, measure_bucket, zero_threshold,
    CalibrationConfig, CalibrationCurve, CarveError, Detector, DetectorError, Method, ScanPlan,
    SceneImage,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, DetectorKind, ExperimentConfig};
use crate::timing::{acquisition_time, pattern_time, REFERENCE_PIXELS};

/// Top of the typed-response scale.
pub const TYPED_MAX: u8 = 15;
/// Noise stream reserved for the calibration sweep.
const CALIBRATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scene: {0}")]
    Scene(String),
    #[error("detector: {0}")]
    Detector(#[from] DetectorError),
    #[error("stripe {stripe}: {source}")]
    Carve { stripe: usize, source: CarveError },
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error("replay diverged at stripe {stripe}: {message}")]
    Replay { stripe: usize, message: String },
    #[error("the {0:?} detector needs the session service")]
    NeedsService(DetectorKind),
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("encoding artifacts: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    /// Carved acquisition.
    Adaptive,
    /// Every basis pattern, for standard GI.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Simulated,
    Typed,
    Transcribed,
}

/// One projected pattern and its response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Simulated seconds since the session started.
    pub timestamp: f64,
    pub duration: f64,
    pub pass: Pass,
    pub stripe: usize,
    pub pattern_id: usize,
    /// Displayed level in `[0, 1]`: pattern/object overlap over stripe length.
    pub level: f64,
    /// Evoked energy for the simulated channel, 0–15 for typed channels;
    /// `None` when no response arrived.
    pub value: Option<f64>,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub method: Method,
    pub ssim: Option<f64>,
    pub patterns_used: usize,
    pub simulated_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub config: ExperimentConfig,
    pub scene: SceneImage,
    pub calibration: CalibrationCurve,
    pub events: Vec<Event>,
    pub reconstructions: Vec<ReconstructionSummary>,
}

impl SessionLog {
    pub fn total_time(&self) -> f64 {
        self.events.iter().map(|e| e.duration).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub log: SessionLog,
    pub reconstructions: Vec<Reconstruction>,
}

pub fn calibration_for(cfg: &ExperimentConfig) -> Result<CalibrationCurve, ExperimentError> {
    let mut noise = cfg.noise.then(|| NoiseModel::with_stream(cfg.sigma_ratio, cfg.seed, CALIBRATION_STREAM));
    Ok(calibrate(&cfg.model, noise.as_mut(), &CalibrationConfig::new(cfg.frequency))?)
}

/// Energy standing for a typed answer: the answer picks a point of the linear
/// range, read through the calibration curve.
pub fn typed_energy(value: f64, calib: &CalibrationCurve) -> f64 {
    calib.energy_for(calib.bias_level() + calib.span() * value / f64::from(TYPED_MAX))
}

/// Runs a simulated experiment end to end.
pub fn run_experiment(cfg: &ExperimentConfig, scene: &SceneImage) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    if cfg.detector != DetectorKind::Sim {
        return Err(ExperimentError::NeedsService(cfg.detector));
    }
    let plan = plan_for(scene)?;
    let calib = calibration_for(cfg)?;
    let object = scene.binarize(0.5);
    let threshold = zero_threshold(cfg.model.mu0).map_err(|e| ExperimentError::Carve { stripe: 0, source: e })?;
    let n = plan.stripe_len();
    let mut clock = Clock::new(cfg, n);
    let mut events = Vec::new();

    for s in 0..plan.segment_count() {
        let stripe = plan.extract(&object, s);
        let mut det = Simulated {
            object: stripe,
            cfg,
            calib: &calib,
            noise: cfg.noise.then(|| NoiseModel::with_stream(cfg.sigma_ratio, cfg.seed, 2 * s as u64)),
            stripe: s,
            pass: Pass::Adaptive,
            clock: &mut clock,
            events: &mut events,
        };
        adaptive_acquire(&mut det, n, threshold).map_err(|e| match e.failure {
            AcquireFailure::Detector(d) => ExperimentError::Detector(d),
            AcquireFailure::Carve(c) => ExperimentError::Carve { stripe: s, source: c },
        })?;
    }
    if cfg.wants(Method::Gi) {
        let basis = binarize(&hadamard(n.trailing_zeros()).map_err(|e| ExperimentError::Scene(e.to_string()))?);
        for s in 0..plan.segment_count() {
            let mut det = Simulated {
                object: plan.extract(&object, s),
                cfg,
                calib: &calib,
                noise: cfg.noise.then(|| NoiseModel::with_stream(cfg.sigma_ratio, cfg.seed, 2 * s as u64 + 1)),
                stripe: s,
                pass: Pass::Full,
                clock: &mut clock,
                events: &mut events,
            };
            for c in 0..n {
                det.measure(c, &basis.column(c))?;
            }
        }
    }
    let log = SessionLog { config: cfg.clone(), scene: scene.clone(), calibration: calib, events, reconstructions: Vec::new() };
    reconstruct_log(log)
}

/// Rebuilds every requested reconstruction from a log's events.
pub fn replay(log: &SessionLog) -> Result<ExperimentOutput, ExperimentError> {
    let mut log = log.clone();
    log.reconstructions.clear();
    reconstruct_log(log)
}

/// Reconstructs from recorded events and fills in the log's summaries.
pub fn reconstruct_log(mut log: SessionLog) -> Result<ExperimentOutput, ExperimentError> {
    let cfg = &log.config;
    let calib = &log.calibration;
    let plan = plan_for(&log.scene)?;
    let n = plan.stripe_len();
    let threshold = zero_threshold(cfg.model.mu0).map_err(|e| ExperimentError::Carve { stripe: 0, source: e })?;
    let energy_of = |e: &Event| -> Result<f64, ExperimentError> {
        let v = e.value.ok_or_else(|| ExperimentError::Replay {
            stripe: e.stripe,
            message: format!("pattern {} has no response", e.pattern_id),
        })?;
        Ok(match e.channel {
            Channel::Simulated => v,
            Channel::Typed | Channel::Transcribed => typed_energy(v, calib),
        })
    };

    let mut carved = Vec::new();
    let mut adaptive_patterns = 0;
    for s in 0..plan.segment_count() {
        let mut queue = VecDeque::new();
        for e in log.events.iter().filter(|e| e.pass == Pass::Adaptive && e.stripe == s) {
            queue.push_back((e.pattern_id, energy_of(e)?));
        }
        adaptive_patterns += queue.len();
        let mut det = Replayed { queue };
        let (state, record) = adaptive_acquire(&mut det, n, threshold).map_err(|e| match e.failure {
            AcquireFailure::Detector(message) => ExperimentError::Replay { stripe: s, message },
            AcquireFailure::Carve(c) => ExperimentError::Carve { stripe: s, source: c },
        })?;
        if !det.queue.is_empty() {
            return Err(ExperimentError::Replay { stripe: s, message: format!("{} unused events", det.queue.len()) });
        }
        carved.push((state, record));
    }

    let time = |patterns| acquisition_time(patterns, cfg.dwell, cfg.pause, n, REFERENCE_PIXELS);
    let mut out = Vec::new();
    for &method in &cfg.methods {
        let (image, patterns_used) = match method {
            Method::Gi => gi_image(&log, &plan, &energy_of)?,
            Method::Cgi | Method::CgiMask => {
                let masked = method == Method::CgiMask;
                let stripes = carved
                    .iter()
                    .enumerate()
                    .map(|(i, (state, record))| {
                        reconstruct_carved(state, record, calib, masked, cfg.max_condition)
                            .map(Some)
                            .map_err(|e| ReconstructError::Stripe { index: i, source: Box::new(e) })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (assemble(&stripes, &plan)?, adaptive_patterns)
            }
        };
        let score = ssim(&image, &log.scene)?;
        out.push(Reconstruction { image, method, ssim: Some(score), patterns_used, simulated_time: time(patterns_used) });
    }
    log.reconstructions = out
        .iter()
        .map(|r| ReconstructionSummary {
            method: r.method,
            ssim: r.ssim,
            patterns_used: r.patterns_used,
            simulated_time: r.simulated_time,
        })
        .collect();
    Ok(ExperimentOutput { log, reconstructions: out })
}

fn gi_image(
    log: &SessionLog,
    plan: &ScanPlan,
    energy_of: &dyn Fn(&Event) -> Result<f64, ExperimentError>,
) -> Result<(SceneImage, usize), ExperimentError> {
    let n = plan.stripe_len();
    let basis = binarize(&hadamard(n.trailing_zeros()).map_err(|e| ExperimentError::Scene(e.to_string()))?);
    let mut raw = Vec::new();
    let mut used = 0;
    for s in 0..plan.segment_count() {
        let (mut buckets, mut patterns) = (Vec::new(), Vec::new());
        for e in log.events.iter().filter(|e| e.pass == Pass::Full && e.stripe == s) {
            if e.pattern_id >= n {
                return Err(ExperimentError::Replay { stripe: s, message: format!("pattern {} out of range", e.pattern_id) });
            }
            buckets.push(energy_of(e)?);
            patterns.push(basis.column(e.pattern_id));
        }
        if buckets.is_empty() {
            return Err(ExperimentError::Replay { stripe: s, message: "no full-basis events for GI".into() });
        }
        used += buckets.len();
        raw.push(gi_correlation(&buckets, &patterns, log.calibration.baseline())?);
    }
    // normalize over the whole scene so dark stripes stay dark
    let flat: Vec<f64> = raw.concat();
    let norm = normalize_min_max(&flat);
    let stripes: Vec<Option<Vec<f64>>> = norm.chunks(n).map(|c| Some(c.to_vec())).collect();
    Ok((assemble(&stripes, plan)?, used))
}

fn plan_for(scene: &SceneImage) -> Result<ScanPlan, ExperimentError> {
    make_scan_plan(scene.width, scene.height).map_err(|e| ExperimentError::Scene(e.to_string()))
}

struct Clock {
    now: f64,
    step: f64,
}

impl Clock {
    fn new(cfg: &ExperimentConfig, stripe_len: usize) -> Self {
        Self { now: 0.0, step: pattern_time(cfg.dwell, cfg.pause, stripe_len, REFERENCE_PIXELS) }
    }

    fn tick(&mut self) -> (f64, f64) {
        let t = self.now;
        self.now += self.step;
        (t, self.step)
    }
}

/// Simulated detector that logs every measurement.
struct Simulated<'a> {
    object: Vec<u8>,
    cfg: &'a ExperimentConfig,
    calib: &'a CalibrationCurve,
    noise: Option<NoiseModel>,
    stripe: usize,
    pass: Pass,
    clock: &'a mut Clock,
    events: &'a mut Vec<Event>,
}

impl Detector for Simulated<'_> {
    type Error = DetectorError;

    fn measure(&mut self, column_id: usize, pattern: &[u8]) -> Result<f64, DetectorError> {
        let energy = measure_bucket(pattern, &self.object, &self.cfg.model, self.noise.as_mut(), self.calib)?;
        let level = display_level(pattern, &self.object, self.calib)?;
        let (timestamp, duration) = self.clock.tick();
        self.events.push(Event {
            timestamp,
            duration,
            pass: self.pass,
            stripe: self.stripe,
            pattern_id: column_id,
            level,
            value: Some(energy),
            channel: Channel::Simulated,
        });
        Ok(energy)
    }
}

/// Overlap fraction shown to a human observer.
pub fn display_level(pattern: &[u8], object: &[u8], calib: &CalibrationCurve) -> Result<f64, DetectorError> {
    let p = projected_intensity(pattern, object, calib)?;
    Ok((p - calib.bias_level()) / calib.span())
}

/// Feeds recorded energies back in order.
struct Replayed {
    queue: VecDeque<(usize, f64)>,
}

impl Detector for Replayed {
    type Error = String;

    fn measure(&mut self, column_id: usize, _: &[u8]) -> Result<f64, String> {
        match self.queue.pop_front() {
            Some((id, e)) if id == column_id => Ok(e),
            Some((id, _)) => Err(format!("engine asked for pattern {column_id}, log has {id}")),
            None => Err(format!("log ends before pattern {column_id}")),
        }
    }
}

/// Writes one PGM and JSON sidecar per method, the session log and the
/// calibration table.
pub fn write_artifacts(dir: &Path, output: &ExperimentOutput) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    let cfg = &output.log.config;
    for r in &output.reconstructions {
        let label = r.method.label();
        crate::io::write_pgm(&dir.join(format!("{label}.pgm")), &r.image)?;
        let sidecar = Sidecar {
            method: r.method,
            ssim: r.ssim,
            patterns_used: r.patterns_used,
            simulated_time: r.simulated_time,
            parameters: Parameters {
                frequency: cfg.frequency,
                dwell: cfg.dwell,
                pause: cfg.pause,
                seed: cfg.seed,
                noise: cfg.noise,
                sigma_ratio: cfg.sigma_ratio,
                max_condition: cfg.max_condition,
                width: r.image.width,
                height: r.image.height,
                ssim_window: SsimWindow::default(),
            },
        };
        fs::write(dir.join(format!("{label}.json")), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    }
    fs::write(dir.join("session.json"), serde_json::to_string_pretty(&output.log)? + "\n")?;
    let mut csv = Vec::new();
    crate::io::write_calibration_csv(&mut csv, &output.log.calibration)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    fs::write(dir.join("calibration.csv"), csv)?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar {
    method: Method,
    ssim: Option<f64>,
    patterns_used: usize,
    simulated_time: f64,
    parameters: Parameters,
}

#[derive(Serialize)]
struct Parameters {
    frequency: f64,
    dwell: f64,
    pause: f64,
    seed: u64,
    noise: bool,
    sigma_ratio: f64,
    max_condition: f64,
    width: usize,
    height: usize,
    ssim_window: SsimWindow,
}

#[derive(Serialize)]
struct SsimWindow {
    size: usize,
    sigma: f64,
    k1: f64,
    k2: f64,
    dynamic_range: f64,
}

impl Default for SsimWindow {
    fn default() -> Self {
        use ghostcarve_core::reconstruct as s;
        Self { size: 2 * s::WINDOW_RADIUS + 1, sigma: s::WINDOW_SIGMA, k1: s::K1, k2: s::K2, dynamic_range: s::DYNAMIC_RANGE }
    }
}
