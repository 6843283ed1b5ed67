//! Window classifier: interval-quantile features feeding an ensemble of
//! extremely randomized trees. The fall probability of a window is the mean
//! of the per-tree leaf fall frequencies.

mod features;
mod model_io;
mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use features::{extract_features, FeatureSpec, FeatureVector, Representation};
pub use model_io::{load, load_path, save, save_path, MODEL_FORMAT_VERSION};
pub use tree::ExtraTree;
use tree::{Samples, TreeParams};

use crate::error::{Error, Result};
use crate::segmentation::TrainingSet;
use crate::signal::Window;
use crate::stream::WindowClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per node; `None` uses floor(sqrt(F)).
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_features: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_trees(n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            seed,
            ..Self::default()
        }
    }
}

/// A trained, immutable window classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalQuantileModel {
    spec: FeatureSpec,
    trees: Vec<ExtraTree>,
    w_seconds: u32,
    fs: u32,
}

impl IntervalQuantileModel {
    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn trees(&self) -> &[ExtraTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn w_seconds(&self) -> u32 {
        self.w_seconds
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn version(&self) -> u32 {
        MODEL_FORMAT_VERSION
    }

    /// Samples per window.
    pub fn window_len(&self) -> usize {
        self.w_seconds as usize * self.fs as usize
    }

    /// Fall probability of a standardized window.
    pub fn predict_proba(&self, win: &Window) -> Result<f64> {
        self.predict_values(&win.values)
    }

    pub fn predict_values(&self, standardized: &[f64]) -> Result<f64> {
        if standardized.len() != self.window_len() {
            return Err(Error::Shape {
                expected: self.window_len(),
                got: standardized.len(),
            });
        }
        let features = extract_features(standardized, &self.spec)?;
        Ok(self.predict_features(&features))
    }

    pub fn predict_features(&self, features: &FeatureVector) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(&features.values)).sum();
        sum / self.trees.len() as f64
    }

    /// Per-tree leaf fall frequencies, in ensemble order.
    pub fn tree_probabilities(&self, features: &FeatureVector) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(&features.values)).collect()
    }

    /// A model made of a contiguous slice of this ensemble's trees.
    pub fn sub_ensemble(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            spec: self.spec.clone(),
            trees: self.trees[range].to_vec(),
            w_seconds: self.w_seconds,
            fs: self.fs,
        }
    }
}

impl WindowClassifier for IntervalQuantileModel {
    fn window_len(&self) -> usize {
        IntervalQuantileModel::window_len(self)
    }

    fn predict_standardized(&self, window: &[f64]) -> f64 {
        // Lengths are fixed by the detector and features of a finite window are finite.
        self.predict_values(window)
            .expect("detector windows match the model length")
    }
}

/// Trains the ensemble. Deterministic for a fixed `params.seed` regardless of
/// thread count: tree `i` draws from stream `i` of a ChaCha generator.
pub fn fit(ts: &TrainingSet, spec: &FeatureSpec, params: &ForestParams) -> Result<IntervalQuantileModel> {
    spec.validate()?;
    if params.n_trees == 0 {
        return Err(Error::Config("ensemble needs at least one tree".into()));
    }
    if ts.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n_falls = ts.n_falls();
    if n_falls == 0 {
        return Err(Error::DegenerateTraining("adl only"));
    }
    if n_falls == ts.len() {
        return Err(Error::DegenerateTraining("falls only"));
    }
    let window_len = ts.w_seconds as usize * ts.fs as usize;
    if let Some(seg) = ts.segments.iter().find(|s| s.window.len() != window_len) {
        return Err(Error::Shape {
            expected: window_len,
            got: seg.window.len(),
        });
    }
    spec.check_window_len(window_len)?;

    let n_features = spec.n_features();
    let rows = ts
        .segments
        .par_iter()
        .map(|s| extract_features(&s.window.values, spec).map(|f| f.values))
        .collect::<Result<Vec<_>>>()?;
    let matrix: Vec<f64> = rows.into_iter().flatten().collect();
    let labels: Vec<bool> = ts.segments.iter().map(|s| s.label.is_fall()).collect();
    let data = Samples {
        features: &matrix,
        n_features,
        labels: &labels,
    };
    let tree_params = TreeParams {
        max_features: params
            .max_features
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features),
        min_samples_split: params.min_samples_split.max(2),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64);
            ExtraTree::fit(&data, tree_params, &mut rng)
        })
        .collect();
    Ok(IntervalQuantileModel {
        spec: spec.clone(),
        trees,
        w_seconds: ts.w_seconds,
        fs: ts.fs,
    })
}
