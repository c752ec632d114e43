//! Conscious/nonconscious comparison on an 8×8 scene.
//!
//! The 64 full-basis GI buckets of the scene are precomputed and shown as
//! uniform flicker stimuli. Each stimulus is read by the simulated detector
//! and, optionally, by a person typing the perceived intensity on a 0–15
//! scale. Every channel is reconstructed with standard GI and scored.

use std::collections::BTreeMap;
use std::path::Path;

use ghostcarve_core::detector::NoiseModel;
use ghostcarve_core::reconstruct::{ssim, ReconstructError};
use ghostcarve_core::{binarize, hadamard, standard_gi, ResponseModel, SceneImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{Channel, Event, Pass, TYPED_MAX};
use crate::timing::pattern_time;

pub const SCENE_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum ConsciousError {
    #[error("scene must be {SCENE_SIDE}x{SCENE_SIDE}, got {0}x{1}")]
    Scene(usize, usize),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error("response file: {0}")]
    Responses(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsciousConfig {
    pub frequency: f64,
    pub dwell: f64,
    pub pause: f64,
    pub seed: u64,
    pub noise: bool,
    pub sigma_ratio: f64,
    pub repetitions: usize,
    pub model: ResponseModel,
    /// Top of the detector's linear range; the brightest stimulus maps here.
    pub top_level: f64,
}

impl Default for ConsciousConfig {
    fn default() -> Self {
        Self {
            frequency: 6.0,
            dwell: 2.0,
            pause: 0.5,
            seed: 0,
            noise: true,
            sigma_ratio: 0.4,
            repetitions: 5,
            model: ResponseModel::default(),
            top_level: 0.3,
        }
    }
}

/// Source of typed (or transcribed) answers.
pub trait TypedSource {
    /// `attempt` is 0 for the first prompt and 1 for the single re-prompt.
    fn ask(&mut self, repetition: usize, pattern_id: usize, level: f64, attempt: u8) -> Option<i64>;
}

/// Answers read from a JSON file: `{"<repetition>": [[attempt, ...], ...]}`,
/// one list of attempts per pattern; `null` marks a missing answer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayResponses {
    pub runs: BTreeMap<usize, Vec<Vec<Option<i64>>>>,
}

impl ReplayResponses {
    pub fn load(path: &Path) -> Result<Self, ConsciousError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConsciousError::Responses(format!("{}: {e}", path.display())))?;
        let runs = serde_json::from_str(&text).map_err(|e| ConsciousError::Responses(e.to_string()))?;
        Ok(Self { runs })
    }
}

impl TypedSource for ReplayResponses {
    fn ask(&mut self, repetition: usize, pattern_id: usize, _: f64, attempt: u8) -> Option<i64> {
        self.runs.get(&repetition)?.get(pattern_id)?.get(usize::from(attempt)).copied().flatten()
    }
}

/// The 64 basis patterns and their bucket values (overlap / 64).
pub fn bucket_intensities(scene: &SceneImage) -> Result<(Vec<Vec<u8>>, Vec<f64>), ConsciousError> {
    if (scene.width, scene.height) != (SCENE_SIDE, SCENE_SIDE) {
        return Err(ConsciousError::Scene(scene.width, scene.height));
    }
    let n = SCENE_SIDE * SCENE_SIDE;
    let basis = binarize(&hadamard(n.trailing_zeros()).expect("order 6"));
    let object = scene.binarize(0.5);
    let patterns: Vec<Vec<u8>> = (0..n).map(|c| basis.column(c)).collect();
    let buckets = patterns
        .iter()
        .map(|p| p.iter().zip(&object).filter(|(&a, &b)| a & b == 1).count() as f64 / n as f64)
        .collect();
    Ok((patterns, buckets))
}

/// Nearest level of the 0–15 scale spanning the bucket range: the smallest
/// bucket (zero, when any pattern misses the object) at 0, the largest at 15.
pub fn quantize(bucket: f64, min_bucket: f64, max_bucket: f64) -> u8 {
    if !(max_bucket > min_bucket) {
        return 0;
    }
    let t = (bucket - min_bucket) / (max_bucket - min_bucket);
    (t * f64::from(TYPED_MAX)).round().clamp(0.0, f64::from(TYPED_MAX)) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub channel: Channel,
    pub ssim: f64,
    /// Patterns whose answer never arrived and was replaced by the mean.
    pub absent: usize,
    pub image: SceneImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsciousRun {
    pub repetition: usize,
    pub events: Vec<Event>,
    pub channels: Vec<ChannelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsciousReport {
    pub runs: Vec<ConsciousRun>,
    /// Mean SSIM per channel over the repetitions.
    pub mean_ssim: BTreeMap<String, f64>,
    /// Typed values are mapped affinely onto the detector range.
    pub note: String,
}

/// Runs the protocol; `typed` adds a second channel under the given label.
pub fn conscious_protocol(
    scene: &SceneImage,
    cfg: &ConsciousConfig,
    mut typed: Option<(&mut dyn TypedSource, Channel)>,
) -> Result<ConsciousReport, ConsciousError> {
    let (patterns, buckets) = bucket_intensities(scene)?;
    let max_bucket = buckets.iter().copied().fold(0.0, f64::max);
    let step = pattern_time(cfg.dwell, cfg.pause, 1, 1);
    let mut runs = Vec::new();
    for rep in 0..cfg.repetitions {
        let mut noise = cfg.noise.then(|| NoiseModel::with_stream(cfg.sigma_ratio, cfg.seed, rep as u64));
        let mut events = Vec::new();
        let mut sim_values = Vec::with_capacity(buckets.len());
        let mut typed_values: Vec<Option<f64>> = Vec::with_capacity(buckets.len());
        for (id, &b) in buckets.iter().enumerate() {
            let level = if max_bucket > 0.0 { b / max_bucket } else { 0.0 };
            let mean = cfg.model.energy(cfg.frequency, level * cfg.top_level);
            let energy = match noise.as_mut() {
                Some(n) => n.draw(mean),
                None => mean,
            };
            let timestamp = id as f64 * step;
            let event = |value, channel| Event {
                timestamp,
                duration: step,
                pass: Pass::Full,
                stripe: 0,
                pattern_id: id,
                level,
                value,
                channel,
            };
            sim_values.push(energy);
            events.push(event(Some(energy), Channel::Simulated));
            if let Some((source, channel)) = typed.as_mut() {
                let answer = (0..2u8)
                    .find_map(|attempt| source.ask(rep, id, level, attempt).filter(|&v| (0..=i64::from(TYPED_MAX)).contains(&v)))
                    .map(|v| v as f64);
                typed_values.push(answer);
                events.push(event(answer, *channel));
            }
        }
        let mut channels = vec![score(Channel::Simulated, &sim_values, 0, &patterns, scene)?];
        if let Some((_, channel)) = typed.as_ref() {
            let present: Vec<f64> = typed_values.iter().flatten().copied().collect();
            let mean = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
            let filled: Vec<f64> = typed_values.iter().map(|v| v.unwrap_or(mean)).collect();
            let absent = typed_values.len() - present.len();
            channels.push(score(*channel, &filled, absent, &patterns, scene)?);
        }
        runs.push(ConsciousRun { repetition: rep, events, channels });
    }
    let mut mean_ssim = BTreeMap::new();
    for run in &runs {
        for c in &run.channels {
            *mean_ssim.entry(format!("{:?}", c.channel).to_lowercase()).or_insert(0.0) += c.ssim / runs.len() as f64;
        }
    }
    Ok(ConsciousReport {
        runs,
        mean_ssim,
        note: "typed 0-15 answers are mapped affinely onto the detector's linear range".into(),
    })
}

fn score(
    channel: Channel,
    values: &[f64],
    absent: usize,
    patterns: &[Vec<u8>],
    scene: &SceneImage,
) -> Result<ChannelResult, ConsciousError> {
    // Mean-bucket baseline: typed answers carry no detector offset, and the
    // pixel lit by every pattern would otherwise dominate.
    let baseline = values.iter().sum::<f64>() / values.len() as f64;
    let image = SceneImage::new(scene.width, scene.height, standard_gi(values, patterns, baseline)?)?;
    Ok(ChannelResult { channel, ssim: ssim(&image, scene)?, absent, image })
}
