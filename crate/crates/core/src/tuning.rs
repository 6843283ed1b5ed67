//! Cost-sensitive selection of the decision threshold.
//!
//! Every candidate threshold is scored with the gain
//! `g = FP * G[adl][fall] + FN * G[fall][adl]` (with the default matrix,
//! `-(FP + 2 FN)`), pooled over participant-wise cross-validation folds in
//! which held-out recordings are processed in streaming mode.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fit, IntervalQuantileModel};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_detections, ConfusionCounts};
use crate::segmentation::build_training_set;
use crate::signal::{Annotation, Signal};
use crate::stream::{detect, window_probabilities_with, WindowProbSeq};

const FALL: usize = 0;
const ADL: usize = 1;

/// 2x2 gain matrix; rows are the true class, columns the predicted class,
/// index 0 = fall, 1 = ADL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GainMatrix(pub [[i64; 2]; 2]);

impl Default for GainMatrix {
    fn default() -> Self {
        Self([[0, -2], [-1, 0]])
    }
}

impl GainMatrix {
    /// A missed fall costs `ratio` false alarms.
    pub fn from_cost_ratio(ratio: u32) -> Self {
        Self([[0, -(ratio as i64)], [-1, 0]])
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.0;
        if g[FALL][FALL] != 0 || g[ADL][ADL] != 0 {
            return Err(Error::GainMatrix("diagonal entries must be 0".into()));
        }
        if g[FALL][ADL] > 0 || g[ADL][FALL] > 0 {
            return Err(Error::GainMatrix("misclassification gains must be <= 0".into()));
        }
        Ok(())
    }

    pub fn false_positive(&self) -> i64 {
        self.0[ADL][FALL]
    }

    pub fn false_negative(&self) -> i64 {
        self.0[FALL][ADL]
    }
}

/// Gain of a set of misclassifications. Never positive; 0 only without errors.
pub fn gain(fp: u64, fn_: u64, g: &GainMatrix) -> i64 {
    fp as i64 * g.false_positive() + fn_ as i64 * g.false_negative()
}

/// `n` evenly spaced thresholds `i / n`, `i = 1..=n`.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// Participant-wise fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: Vec<Vec<String>>,
}

impl FoldAssignment {
    pub fn fold_of(&self, subject: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.iter().any(|s| s == subject))
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Shuffles the distinct subjects with `seed` and deals them round-robin,
/// so fold sizes differ by at most one.
pub fn fold_split<S: AsRef<str>>(subject_ids: &[S], folds: usize, seed: u64) -> Result<FoldAssignment> {
    let unique: BTreeSet<&str> = subject_ids.iter().map(AsRef::as_ref).collect();
    if folds == 0 || unique.len() < folds {
        return Err(Error::Split {
            subjects: unique.len(),
            folds,
        });
    }
    let mut subjects: Vec<&str> = unique.into_iter().collect();
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (i, s) in subjects.into_iter().enumerate() {
        out[i % folds].push(s.to_owned());
    }
    for fold in &mut out {
        fold.sort();
    }
    Ok(FoldAssignment { folds: out })
}

/// Window probabilities of one held-out recording plus its ground truth.
#[derive(Debug, Clone)]
pub struct HeldOutSignal {
    pub probs: WindowProbSeq,
    pub annotations: Vec<Annotation>,
    pub len: usize,
}

impl HeldOutSignal {
    pub fn from_signal<C: crate::stream::WindowClassifier>(model: C, sig: &Signal, cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            probs: window_probabilities_with(model, sig, cfg.stream(sig.fs()))?,
            annotations: sig.annotations().to_vec(),
            len: sig.len(),
        })
    }

    pub fn evaluate(&self, tau: f64, tolerance_seconds: f64) -> Result<crate::evaluation::MatchResult> {
        let dets = detect(&self.probs, tau)?;
        Ok(evaluate_detections(&dets, &self.annotations, &self.probs, self.len, tolerance_seconds))
    }
}

/// Confusion counts at every threshold, summed over `signals`.
pub fn sweep_thresholds(signals: &[HeldOutSignal], thresholds: &[f64], tolerance_seconds: f64) -> Result<Vec<ConfusionCounts>> {
    thresholds
        .iter()
        .map(|&tau| {
            let mut total = ConfusionCounts::default();
            for s in signals {
                total += s.evaluate(tau, tolerance_seconds)?.counts;
            }
            Ok(total)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub thresholds: Vec<f64>,
    pub mean_gain: Vec<f64>,
    pub best_tau: f64,
    /// Pooled counts per threshold.
    pub counts: Vec<ConfusionCounts>,
    pub folds: usize,
}

impl GainCurve {
    /// Pools per-fold counts per threshold and averages the gain over folds.
    pub fn from_fold_counts(thresholds: Vec<f64>, per_fold: &[Vec<ConfusionCounts>], g: &GainMatrix) -> Result<Self> {
        if per_fold.is_empty() || thresholds.is_empty() {
            return Err(Error::Config("gain curve needs at least one fold and one threshold".into()));
        }
        let mut counts = vec![ConfusionCounts::default(); thresholds.len()];
        for fold in per_fold {
            if fold.len() != thresholds.len() {
                return Err(Error::Contract("fold counts do not match the threshold grid".into()));
            }
            for (acc, c) in counts.iter_mut().zip(fold) {
                *acc += *c;
            }
        }
        let n = per_fold.len() as f64;
        let mean_gain: Vec<f64> = counts.iter().map(|c| gain(c.fp, c.fn_, g) as f64 / n).collect();
        let best = best_index(&mean_gain);
        Ok(Self {
            best_tau: thresholds[best],
            thresholds,
            mean_gain,
            counts,
            folds: per_fold.len(),
        })
    }

    pub fn gain_at(&self, tau: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|t| (t - tau).abs() < 1e-12)
            .map(|i| self.mean_gain[i])
    }

    pub fn best_gain(&self) -> f64 {
        self.gain_at(self.best_tau).expect("best_tau is on the grid")
    }
}

/// Index of the highest gain; ties go to the largest threshold.
fn best_index(gains: &[f64]) -> usize {
    let mut best = 0;
    for (i, g) in gains.iter().enumerate() {
        if *g >= gains[best] {
            best = i;
        }
    }
    best
}

/// Per-fold training and held-out window probabilities.
pub struct FoldRun {
    pub test_subjects: Vec<String>,
    pub model: IntervalQuantileModel,
    pub held_out: Vec<HeldOutSignal>,
    pub n_train_falls: usize,
    pub n_train_adl: usize,
}

/// Trains one model per participant-wise fold and scores the fold's
/// held-out recordings in streaming mode.
pub fn cross_validate(signals: &[Signal], cfg: &RunConfig) -> Result<(FoldAssignment, Vec<FoldRun>)> {
    cfg.validate()?;
    let subjects: Vec<&str> = signals.iter().map(|s| s.subject_id()).collect();
    let assignment = fold_split(&subjects, cfg.folds, cfg.seed)?;
    let runs = assignment
        .folds
        .par_iter()
        .map(|test| {
            let (held, train): (Vec<&Signal>, Vec<&Signal>) =
                signals.iter().partition(|s| test.iter().any(|t| t == s.subject_id()));
            let train: Vec<Signal> = train.into_iter().cloned().collect();
            let ts = build_training_set(&train, cfg.w_seconds, &cfg.segmentation())?;
            let model = fit(&ts, &cfg.features, &cfg.forest())?;
            let held_out = held
                .par_iter()
                .map(|s| HeldOutSignal::from_signal(&model, s, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok(FoldRun {
                test_subjects: test.clone(),
                n_train_falls: ts.n_falls(),
                n_train_adl: ts.n_adl(),
                model,
                held_out,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((assignment, runs))
}

/// Cross-validated gain curve over the threshold grid.
pub fn tune_threshold(signals: &[Signal], cfg: &RunConfig) -> Result<GainCurve> {
    let (_, runs) = cross_validate(signals, cfg)?;
    gain_curve(&runs, cfg)
}

pub fn gain_curve(runs: &[FoldRun], cfg: &RunConfig) -> Result<GainCurve> {
    let thresholds = threshold_grid(cfg.grid_size);
    let per_fold = runs
        .par_iter()
        .map(|r| sweep_thresholds(&r.held_out, &thresholds, cfg.tolerance_seconds))
        .collect::<Result<Vec<_>>>()?;
    GainCurve::from_fold_counts(thresholds, &per_fold, &cfg.gain_matrix())
}
