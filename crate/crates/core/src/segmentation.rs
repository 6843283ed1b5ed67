//! Training-set construction from annotated continuous recordings.
//!
//! A fall segment spans the falling phase (1 s before impact), the 1 s
//! impact phase and `w - 2` seconds of post-fall activity. ADL segments are
//! overlapping grid windows outside every fall's exclusion zone whose raw
//! peak magnitude exceeds the gate.

use std::ops::Range;

use log::warn;

use crate::error::{Error, Result};
use crate::signal::{standardize_in_place, Signal, Window};

/// Physical pre-filter on raw magnitude, in g.
pub const GATE_G: f64 = 1.4;

/// Shortest window that holds the falling, impact and (non-empty) post-fall phases.
pub const MIN_WINDOW_SECONDS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Adl = 0,
    Fall = 1,
}

impl Label {
    pub fn is_fall(self) -> bool {
        self == Label::Fall
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub window: Window,
    pub label: Label,
    pub subject_id: String,
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub segments: Vec<LabeledSegment>,
    pub w_seconds: u32,
    pub fs: u32,
    /// Annotated falls too close to a recording edge to segment.
    pub skipped_falls: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn n_falls(&self) -> usize {
        self.segments.iter().filter(|s| s.label.is_fall()).count()
    }

    pub fn n_adl(&self) -> usize {
        self.len() - self.n_falls()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    pub step_seconds: u32,
    pub gate_g: f64,
    /// Extra seconds excluded from ADL sampling on each side of a fall segment.
    pub guard_seconds: u32,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            step_seconds: 1,
            gate_g: GATE_G,
            guard_seconds: 5,
        }
    }
}

/// Extracts the raw window `[f - 1 s, f - 1 s + w)` around an annotated impact.
pub fn extract_fall_segment(sig: &Signal, impact_index: usize, w_seconds: u32) -> Result<Window> {
    if w_seconds < MIN_WINDOW_SECONDS {
        return Err(Error::Config(format!(
            "window of {w_seconds} s is shorter than the {MIN_WINDOW_SECONDS} s multiphase minimum"
        )));
    }
    let fs = sig.fs() as i64;
    let start = impact_index as i64 - fs;
    let end = start + w_seconds as i64 * fs;
    if start < 0 || end > sig.len() as i64 {
        return Err(Error::Boundary {
            start,
            end,
            len: sig.len(),
        });
    }
    Window::from_signal(sig, start as usize, w_seconds)
}

/// Sample range a fall excludes from ADL sampling: the fall segment widened
/// by `guard_seconds` on both sides, clipped at zero.
pub fn exclusion_zone(impact_index: usize, fs: u32, w_seconds: u32, guard_seconds: u32) -> Range<usize> {
    let fs = fs as usize;
    let seg_start = impact_index.saturating_sub(fs);
    let start = seg_start.saturating_sub(guard_seconds as usize * fs);
    let end = impact_index + (w_seconds as usize - 1) * fs + guard_seconds as usize * fs;
    start..end
}

/// Returns every raw grid window that avoids all `exclusion` ranges and whose
/// peak magnitude exceeds `gate_g`. Grid starts are multiples of `step_seconds`.
pub fn extract_adl_segments(
    sig: &Signal,
    w_seconds: u32,
    step_seconds: u32,
    gate_g: f64,
    exclusion: &[Range<usize>],
) -> Vec<Window> {
    let fs = sig.fs() as usize;
    let len = w_seconds as usize * fs;
    let step = (step_seconds as usize * fs).max(1);
    if len == 0 || sig.len() < len {
        return Vec::new();
    }
    let samples = sig.samples();
    (0..=sig.len() - len)
        .step_by(step)
        .filter(|&start| {
            let end = start + len;
            !exclusion.iter().any(|ex| ex.start < end && start < ex.end)
        })
        .filter(|&start| samples[start..start + len].iter().any(|&v| v > gate_g))
        .map(|start| Window {
            values: samples[start..start + len].to_vec(),
            start_index: start,
            w_seconds,
        })
        .collect()
}

/// Segments every signal into standardized fall and ADL windows.
///
/// Falls whose segment would cross a recording edge are skipped and counted
/// in [`TrainingSet::skipped_falls`].
pub fn build_training_set(signals: &[Signal], w_seconds: u32, cfg: &SegmentationConfig) -> Result<TrainingSet> {
    if w_seconds < MIN_WINDOW_SECONDS {
        return Err(Error::Config(format!(
            "window of {w_seconds} s is shorter than the {MIN_WINDOW_SECONDS} s multiphase minimum"
        )));
    }
    let fs = match signals.first() {
        Some(s) => s.fs(),
        None => return Err(Error::EmptyTrainingSet),
    };
    if let Some(s) = signals.iter().find(|s| s.fs() != fs) {
        return Err(Error::Config(format!(
            "mixed sampling rates: {} Hz and {} Hz (subject {})",
            fs,
            s.fs(),
            s.subject_id()
        )));
    }

    let mut segments = Vec::new();
    let mut skipped = 0;
    for sig in signals {
        let mut exclusion = Vec::with_capacity(sig.annotations().len());
        for ann in sig.annotations() {
            exclusion.push(exclusion_zone(ann.impact_index, fs, w_seconds, cfg.guard_seconds));
            match extract_fall_segment(sig, ann.impact_index, w_seconds) {
                Ok(window) => segments.push(LabeledSegment {
                    window,
                    label: Label::Fall,
                    subject_id: sig.subject_id().to_owned(),
                }),
                Err(Error::Boundary { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        for window in extract_adl_segments(sig, w_seconds, cfg.step_seconds, cfg.gate_g, &exclusion) {
            segments.push(LabeledSegment {
                window,
                label: Label::Adl,
                subject_id: sig.subject_id().to_owned(),
            });
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} falls too close to a recording edge");
    }
    if segments.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for seg in &mut segments {
        standardize_in_place(&mut seg.window.values);
    }
    Ok(TrainingSet {
        segments,
        w_seconds,
        fs,
        skipped_falls: skipped,
    })
}
