//! Session service for a human detector.
//!
//! The engine pushes one `stimulus` at a time over a TCP connection carrying
//! newline-delimited JSON and waits for the matching `response`. If the peer
//! disconnects, the session is checkpointed to disk and the service waits
//! for a reconnect that sends `resume` with the session token; the pending
//! stimulus is then repeated. A response timeout or a protocol violation
//! checkpoints and ends the session.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ghostcarve_core::carve::AcquisitionCheckpoint;
use ghostcarve_core::{make_scan_plan, zero_threshold, Acquisition, Method, SceneImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{DetectorKind, ExperimentConfig};
use crate::experiment::{
    calibration_for, display_level, reconstruct_log, typed_energy, Channel, Event, ExperimentError,
    ExperimentOutput, Pass, SessionLog,
};
use crate::protocol::{check_value, Message};
use crate::timing::{pattern_time, REFERENCE_PIXELS};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("network: {0}")]
    Io(#[from] std::io::Error),
    #[error("no response within {timeout:?}; checkpoint at {}", checkpoint.display())]
    Timeout { timeout: Duration, checkpoint: PathBuf },
    #[error("protocol violation: {reason}; checkpoint at {}", checkpoint.display())]
    Aborted { reason: String, checkpoint: PathBuf },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub timeout: Duration,
    pub checkpoint_dir: PathBuf,
    /// Session token the UI presents in `resume`.
    pub token: String,
}

impl ServiceConfig {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint_dir.join(format!("{}.checkpoint.json", self.token))
    }
}

/// Everything needed to continue a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCheckpoint {
    pub token: String,
    pub log: SessionLog,
    pub stripe: usize,
    pub acquisition: AcquisitionCheckpoint,
}

impl SessionCheckpoint {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Checkpoint(e.to_string()))
    }
}

/// Acquisition state of a human-detector session.
pub struct HumanSession {
    log: SessionLog,
    stripe: usize,
    acq: Acquisition,
    stripe_len: usize,
    segments: usize,
    threshold: f64,
    step: f64,
}

enum Outcome {
    Finished,
    Disconnected,
}

impl HumanSession {
    /// Only carved methods apply: a human session runs the adaptive pass alone.
    pub fn new(cfg: &ExperimentConfig, scene: &SceneImage) -> Result<Self, ServiceError> {
        let mut cfg = cfg.clone();
        cfg.detector = DetectorKind::Human;
        cfg.methods.retain(|&m| m != Method::Gi);
        if cfg.methods.is_empty() {
            cfg.methods = vec![Method::CgiMask];
        }
        cfg.validate().map_err(ExperimentError::from)?;
        let plan = make_scan_plan(scene.width, scene.height).map_err(|e| ExperimentError::Scene(e.to_string()))?;
        let sim = ExperimentConfig { noise: false, ..cfg.clone() };
        let calibration = calibration_for(&sim)?;
        let threshold = zero_threshold(cfg.model.mu0).map_err(|e| ExperimentError::Carve { stripe: 0, source: e })?;
        let n = plan.stripe_len();
        let step = pattern_time(cfg.dwell, cfg.pause, n, REFERENCE_PIXELS);
        Ok(Self {
            acq: Acquisition::new(n, threshold).map_err(|e| ExperimentError::Carve { stripe: 0, source: e })?,
            log: SessionLog { config: cfg, scene: scene.clone(), calibration, events: Vec::new(), reconstructions: Vec::new() },
            stripe: 0,
            stripe_len: n,
            segments: plan.segment_count(),
            threshold,
            step,
        })
    }

    pub fn restore(cp: SessionCheckpoint) -> Result<Self, ServiceError> {
        let mut s = Self::new(&cp.log.config, &cp.log.scene)?;
        if cp.stripe >= s.segments {
            return Err(ServiceError::Checkpoint(format!("stripe {} out of range", cp.stripe)));
        }
        s.acq = Acquisition::restore(cp.acquisition).map_err(|e| ServiceError::Checkpoint(e.to_string()))?;
        s.log = cp.log;
        s.stripe = cp.stripe;
        Ok(s)
    }

    pub fn checkpoint(&self, token: &str) -> SessionCheckpoint {
        SessionCheckpoint {
            token: token.into(),
            log: self.log.clone(),
            stripe: self.stripe,
            acquisition: self.acq.checkpoint(),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.log.events
    }

    /// Wire id of the next stimulus: stripe × stripe length + column id.
    pub fn pending(&mut self) -> Option<(usize, usize, Vec<u8>)> {
        loop {
            if self.stripe >= self.segments {
                return None;
            }
            if let Some((col, pattern)) = self.acq.next_projection() {
                return Some((self.stripe * self.stripe_len + col, col, pattern));
            }
            self.stripe += 1;
            self.acq = Acquisition::new(self.stripe_len, self.threshold).expect("stripe length already accepted");
        }
    }

    fn stripe_object(&self) -> Vec<u8> {
        let plan = make_scan_plan(self.log.scene.width, self.log.scene.height).expect("plan already built");
        plan.extract(&self.log.scene.binarize(0.5), self.stripe)
    }

    fn answer(&mut self, col: usize, pattern: &[u8], value: u8) -> Result<(), ServiceError> {
        let level = display_level(pattern, &self.stripe_object(), &self.log.calibration).map_err(ExperimentError::from)?;
        let energy = typed_energy(f64::from(value), &self.log.calibration);
        self.acq
            .submit(col, energy)
            .map_err(|e| ExperimentError::Carve { stripe: self.stripe, source: e })?;
        let timestamp = self.log.events.len() as f64 * self.step;
        self.log.events.push(Event {
            timestamp,
            duration: self.step,
            pass: Pass::Adaptive,
            stripe: self.stripe,
            pattern_id: col,
            level,
            value: Some(f64::from(value)),
            channel: Channel::Typed,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<ExperimentOutput, ServiceError> {
        Ok(reconstruct_log(self.log)?)
    }
}

/// Accepts connections until the session completes.
pub fn serve(listener: &TcpListener, mut session: HumanSession, cfg: &ServiceConfig) -> Result<ExperimentOutput, ServiceError> {
    let mut interrupted = false;
    loop {
        let (stream, _) = listener.accept()?;
        let mut conn = Conn::new(stream, cfg.timeout)?;
        if interrupted {
            match conn.next_message(Instant::now() + cfg.timeout)? {
                Read::Message(Message::Resume { checkpoint }) if checkpoint == cfg.token => {
                    session = HumanSession::restore(SessionCheckpoint::load(&cfg.checkpoint_path())?)?;
                }
                Read::Message(_) | Read::Invalid(_) => {
                    conn.send(&Message::reject("expected resume with the session token", None))?;
                    continue;
                }
                Read::Closed | Read::TimedOut => continue,
            }
        }
        match drive(&mut conn, &mut session, cfg) {
            Ok(Outcome::Finished) => {
                remove_checkpoint(cfg);
                return session.finish();
            }
            Ok(Outcome::Disconnected) => {
                save_checkpoint(&session, cfg)?;
                interrupted = true;
            }
            Err(e) => return Err(e),
        }
    }
}

fn drive(conn: &mut Conn, session: &mut HumanSession, cfg: &ServiceConfig) -> Result<Outcome, ServiceError> {
    let freq_hz = session.log.config.frequency;
    let dwell_s = session.step - session.log.config.pause;
    while let Some((wire_id, col, pattern)) = session.pending() {
        let level = display_level(&pattern, &session.stripe_object(), &session.log.calibration).map_err(ExperimentError::from)?;
        let stimulus = Message::Stimulus { pattern_id: wire_id, level, freq_hz, dwell_s };
        if conn.send(&stimulus).is_err() {
            return Ok(Outcome::Disconnected);
        }
        let deadline = Instant::now() + cfg.timeout;
        loop {
            let msg = match conn.next_message(deadline)? {
                Read::Message(m) => m,
                Read::Invalid(reason) => {
                    conn.send(&Message::reject(reason, None)).ok();
                    continue;
                }
                Read::Closed => return Ok(Outcome::Disconnected),
                Read::TimedOut => {
                    let checkpoint = save_checkpoint(session, cfg)?;
                    return Err(ServiceError::Timeout { timeout: cfg.timeout, checkpoint });
                }
            };
            match msg {
                Message::Heartbeat => {
                    conn.send(&Message::Heartbeat).ok();
                }
                Message::Response { pattern_id, value } if pattern_id == wire_id => match check_value(value) {
                    Ok(v) => {
                        session.answer(col, &pattern, v)?;
                        break;
                    }
                    Err(reason) => {
                        // re-prompt with the same stimulus
                        if conn.send(&Message::reject(reason, Some(pattern_id))).is_err() || conn.send(&stimulus).is_err() {
                            return Ok(Outcome::Disconnected);
                        }
                    }
                },
                Message::Response { pattern_id, .. } => {
                    conn.send(&Message::reject(format!("no stimulus {pattern_id} outstanding"), Some(pattern_id))).ok();
                }
                Message::Resume { .. } => {
                    conn.send(&Message::reject("session is already running", None)).ok();
                }
                Message::Stimulus { .. } | Message::Reject { .. } => {
                    let checkpoint = save_checkpoint(session, cfg)?;
                    conn.send(&Message::reject("engine-only message from client", None)).ok();
                    return Err(ServiceError::Aborted { reason: "client sent an engine-only message".into(), checkpoint });
                }
            }
        }
    }
    Ok(Outcome::Finished)
}

fn save_checkpoint(session: &HumanSession, cfg: &ServiceConfig) -> Result<PathBuf, ServiceError> {
    std::fs::create_dir_all(&cfg.checkpoint_dir)?;
    let path = cfg.checkpoint_path();
    let json = serde_json::to_string_pretty(&session.checkpoint(&cfg.token)).map_err(|e| ServiceError::Checkpoint(e.to_string()))?;
    std::fs::write(&path, json)?;
    Ok(path)
}

fn remove_checkpoint(cfg: &ServiceConfig) {
    let _ = std::fs::remove_file(cfg.checkpoint_path());
}

enum Read {
    Message(Message),
    Invalid(String),
    Closed,
    TimedOut,
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    line: String,
}

impl Conn {
    fn new(stream: TcpStream, timeout: Duration) -> std::io::Result<Self> {
        stream.set_read_timeout(Some(timeout))?;
        let writer = stream.try_clone()?;
        Ok(Self { reader: BufReader::new(stream), writer, line: String::new() })
    }

    fn send(&mut self, msg: &Message) -> std::io::Result<()> {
        self.writer.write_all(msg.to_line().as_bytes())?;
        self.writer.flush()
    }

    fn next_message(&mut self, deadline: Instant) -> std::io::Result<Read> {
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(Read::TimedOut);
            }
            self.reader.get_ref().set_read_timeout(Some(left))?;
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return Ok(Read::Closed),
                Ok(_) if !self.line.ends_with('\n') => continue,
                Ok(_) => {
                    let line = std::mem::take(&mut self.line);
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Ok(match Message::parse(&line) {
                        Ok(m) => Read::Message(m),
                        Err(e) => Read::Invalid(e),
                    });
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => continue,
                Err(e) if matches!(e.kind(), ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted) => {
                    return Ok(Read::Closed)
                }
                Err(e) => return Err(e),
            }
        }
    }
}
