//! Experiment harness for adaptive ghost imaging: scene files, configuration,
//! the timing ledger, batch simulation, the conscious/nonconscious protocol
//! and the session service that a human-loop UI connects to.

pub mod config;
pub mod conscious;
pub mod experiment;
pub mod io;
pub mod protocol;
pub mod service;
pub mod timing;

pub use config::{DetectorKind, ExperimentConfig};
pub use experiment::{replay, run_experiment, write_artifacts, Channel, Event, ExperimentOutput, SessionLog};
pub use io::load_scene;
pub use timing::acquisition_time;
