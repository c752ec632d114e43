//! Adaptive ghost imaging with Hadamard matrix carving.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical engine:
//!
//! + [`pattern`]: Sylvester Hadamard sets, binarized pattern matrices, flicker
//!   stimulus frames, tile macro-pixel rendering and stripe scan plans.
//! + [`carve`]: zero-overlap thresholding, row/column carving and the adaptive
//!   acquisition loop.
//! + [`detector`]: a simulated SSVEP-like bucket detector (response curve,
//!   harmonic synthesis/extraction, noise and calibration).
//! + [`reconstruct`]: standard GI, carved GI, zero masking, stripe assembly
//!   and SSIM scoring.
//!
//! File formats, the CLI and the human-loop session service live in the
//! `ghostcarve` crate.
#![no_std]

extern crate alloc;

pub mod carve;
pub mod detector;
pub mod pattern;
pub mod rank;
pub mod reconstruct;

pub use carve::{
    adaptive_acquire, column_carve, row_carve, zero_threshold, Acquisition, BucketEntry,
    BucketRecord, CarveError, CarveState, Detector,
};
pub use detector::{
    calibrate, extract_harmonics, measure_bucket, rescale_bias, synthesize_evoked,
    CalibrationConfig, CalibrationCurve, DetectorError, HarmonicEnergies, NoiseModel,
    ResponseModel, SimulatedDetector,
};
pub use reconstruct::{
    apply_zero_masks, assemble, carved_gi, ssim, standard_gi, Method, ReconstructError,
    Reconstruction, SceneImage,
};
pub use pattern::{
    binarize, hadamard, make_scan_plan, render_tile_frame, stimulus_frames, Bitmap,
    HadamardMatrix, PatternError, PatternMatrix, ScanPlan, StimulusSpec, TileSpec,
};
