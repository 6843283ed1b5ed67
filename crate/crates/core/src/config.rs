//! Run configuration shared by training, tuning, detection and evaluation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{FeatureSpec, ForestParams};
use crate::error::{Error, Result};
use crate::segmentation::{SegmentationConfig, GATE_G, MIN_WINDOW_SECONDS};
use crate::stream::StreamConfig;
use crate::tuning::GainMatrix;

/// Window sizes evaluated by the window-size sweep, in seconds.
pub const SWEEP_WINDOW_SECONDS: [u32; 7] = [3, 5, 7, 10, 15, 30, 60];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub w_seconds: u32,
    pub step_seconds: u32,
    pub tolerance_seconds: f64,
    pub gate_g: f64,
    pub grid_size: usize,
    pub folds: usize,
    /// Cost of a missed fall relative to a false alarm.
    pub cost_ratio: u32,
    pub n_trees: usize,
    pub guard_seconds: u32,
    pub features: FeatureSpec,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            w_seconds: 10,
            step_seconds: 1,
            tolerance_seconds: 20.0,
            gate_g: GATE_G,
            grid_size: 100,
            folds: 5,
            cost_ratio: 2,
            n_trees: 200,
            guard_seconds: 5,
            features: FeatureSpec::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_seconds < MIN_WINDOW_SECONDS {
            return Err(Error::Config(format!(
                "window size {} s is below the {MIN_WINDOW_SECONDS} s minimum",
                self.w_seconds
            )));
        }
        if self.step_seconds == 0 || self.step_seconds > self.w_seconds {
            return Err(Error::Config(format!("step {} s must be in [1, w]", self.step_seconds)));
        }
        if !(self.tolerance_seconds >= 0.0 && self.tolerance_seconds.is_finite()) {
            return Err(Error::Config(format!("tolerance {} s must be non-negative", self.tolerance_seconds)));
        }
        if !(self.gate_g.is_finite() && self.gate_g >= 0.0) {
            return Err(Error::Config(format!("gate {} g must be non-negative", self.gate_g)));
        }
        if self.grid_size == 0 {
            return Err(Error::Config("threshold grid needs at least one point".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("{} folds; at least 2 are required", self.folds)));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("ensemble needs at least one tree".into()));
        }
        self.gain_matrix().validate()?;
        self.features.validate()
    }

    pub fn gain_matrix(&self) -> GainMatrix {
        GainMatrix::from_cost_ratio(self.cost_ratio)
    }

    pub fn segmentation(&self) -> SegmentationConfig {
        SegmentationConfig {
            step_seconds: self.step_seconds,
            gate_g: self.gate_g,
            guard_seconds: self.guard_seconds,
        }
    }

    pub fn stream(&self, fs: u32) -> StreamConfig {
        StreamConfig {
            fs,
            w_seconds: self.w_seconds,
            step_seconds: self.step_seconds,
            gate_g: self.gate_g,
        }
    }

    pub fn forest(&self) -> ForestParams {
        ForestParams::with_trees(self.n_trees, self.seed)
    }

    pub fn with_window(&self, w_seconds: u32) -> Self {
        Self {
            w_seconds,
            ..self.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize infallibly");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_hash_is_stable() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), RunConfig::default().hash());
        assert_eq!(cfg.hash().len(), 16);
        assert_ne!(cfg.hash(), cfg.with_window(7).hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig { w_seconds: 2, ..Default::default() }.validate().is_err());
        assert!(RunConfig { folds: 1, ..Default::default() }.validate().is_err());
        assert!(RunConfig { step_seconds: 11, ..Default::default() }.validate().is_err());
        assert!(RunConfig { tolerance_seconds: -1.0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { cost_ratio: 0, ..Default::default() }.validate().is_ok());
    }
}
