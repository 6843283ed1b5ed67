//! Streaming fall detection on accelerometer magnitude signals.
//!
//! A window classifier scores fixed-length windows on a one-second grid,
//! a raw-magnitude gate skips windows without an impact, and a
//! cost-sensitive threshold turns the probability stream into detections.

pub mod classifier;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod segmentation;
pub mod signal;
pub mod stream;
pub mod synth;
pub mod tuning;

pub use classifier::{fit, FeatureSpec, ForestParams, IntervalQuantileModel};
pub use config::RunConfig;
pub use error::{Error, ErrorKind, Result};
pub use signal::{Annotation, Signal, TriaxialSample, Window};
pub use stream::{confidence_map, detect, Detection, StreamDetector, WindowProbSeq};
