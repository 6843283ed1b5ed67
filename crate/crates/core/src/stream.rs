//! Streaming inference over continuous signals.
//!
//! A [`StreamDetector`] slides a `w`-second window over incoming samples in
//! `step`-second increments. Windows whose raw impact sub-interval (second 1
//! to 2 of the window) never exceeds the gate get probability 0 without
//! touching the model; the rest are standardized and scored. Window
//! probabilities are then max-aggregated into a per-sample confidence map
//! and collapsed into one detection per high-confidence region.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::segmentation::GATE_G;
use crate::signal::{standardize_in_place, Signal};

/// Anything that scores a standardized window with a fall probability.
pub trait WindowClassifier {
    /// Samples per window.
    fn window_len(&self) -> usize;
    fn predict_standardized(&self, window: &[f64]) -> f64;
}

impl<C: WindowClassifier + ?Sized> WindowClassifier for &C {
    fn window_len(&self) -> usize {
        (**self).window_len()
    }

    fn predict_standardized(&self, window: &[f64]) -> f64 {
        (**self).predict_standardized(window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub fs: u32,
    pub w_seconds: u32,
    pub step_seconds: u32,
    pub gate_g: f64,
}

impl StreamConfig {
    pub fn new(fs: u32, w_seconds: u32) -> Self {
        Self {
            fs,
            w_seconds,
            step_seconds: 1,
            gate_g: GATE_G,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fs == 0 {
            return Err(Error::Config("sampling rate must be positive".into()));
        }
        if self.w_seconds < 2 {
            return Err(Error::Config(format!(
                "a {} s window has no impact sub-interval",
                self.w_seconds
            )));
        }
        if self.step_seconds == 0 || self.step_seconds > self.w_seconds {
            return Err(Error::Config(format!(
                "step of {} s must be in [1, w = {}]",
                self.step_seconds, self.w_seconds
            )));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.w_seconds as usize * self.fs as usize
    }

    pub fn step_len(&self) -> usize {
        self.step_seconds as usize * self.fs as usize
    }

    /// Number of complete grid windows in a signal of `len` samples.
    pub fn n_windows(&self, len: usize) -> usize {
        if len < self.window_len() {
            0
        } else {
            (len - self.window_len()) / self.step_len() + 1
        }
    }
}

/// Fall probability of each grid window, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowProbSeq {
    pub probs: Vec<f64>,
    pub fs: u32,
    pub w_seconds: u32,
    pub step_seconds: u32,
}

impl WindowProbSeq {
    pub fn n_windows(&self) -> usize {
        self.probs.len()
    }

    pub fn start_index(&self, k: usize) -> usize {
        k * self.step_seconds as usize * self.fs as usize
    }

    pub fn start_seconds(&self, k: usize) -> f64 {
        (k * self.step_seconds as usize) as f64
    }
}

/// Per-sample fall probability, aligned 1:1 with the raw signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub probs: Vec<f64>,
}

impl ConfidenceMap {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub start_index: usize,
    pub start_seconds: f64,
    pub prob: f64,
    pub w_seconds: u32,
}

impl Detection {
    pub fn end_seconds(&self) -> f64 {
        self.start_seconds + self.w_seconds as f64
    }
}

/// Single-pass window scorer. Holds at most one window plus one chunk of
/// samples and never looks past the end of the window being scored, so
/// feeding the same samples in any chunking yields identical output.
pub struct StreamDetector<C: WindowClassifier> {
    model: C,
    cfg: StreamConfig,
    buffer: Vec<f64>,
    /// Absolute index of `buffer[0]`.
    offset: usize,
    next_start: usize,
    probs: Vec<f64>,
    invocations: u64,
    scratch: Vec<f64>,
}

impl<C: WindowClassifier> StreamDetector<C> {
    pub fn new(model: C, cfg: StreamConfig) -> Result<Self> {
        cfg.validate()?;
        if model.window_len() != cfg.window_len() {
            return Err(Error::Shape {
                expected: model.window_len(),
                got: cfg.window_len(),
            });
        }
        Ok(Self {
            model,
            cfg,
            buffer: Vec::with_capacity(2 * cfg.window_len()),
            offset: 0,
            next_start: 0,
            probs: Vec::new(),
            invocations: 0,
            scratch: Vec::with_capacity(cfg.window_len()),
        })
    }

    /// Appends samples and scores every window they complete. Returns the
    /// probabilities of the newly completed windows.
    pub fn push(&mut self, chunk: &[f64]) -> &[f64] {
        let before = self.probs.len();
        self.buffer.extend_from_slice(chunk);
        let len = self.cfg.window_len();
        let fs = self.cfg.fs as usize;
        while self.next_start + len <= self.offset + self.buffer.len() {
            let lo = self.next_start - self.offset;
            let window = &self.buffer[lo..lo + len];
            let impact_peak = window[fs..2 * fs].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p = if impact_peak > self.cfg.gate_g {
                self.scratch.clear();
                self.scratch.extend_from_slice(window);
                standardize_in_place(&mut self.scratch);
                self.invocations += 1;
                self.model.predict_standardized(&self.scratch)
            } else {
                0.0
            };
            self.probs.push(p);
            self.next_start += self.cfg.step_len();
        }
        // Drop samples no future window can reach.
        let keep_from = self.next_start.min(self.offset + self.buffer.len());
        let drop = keep_from - self.offset;
        if drop > 0 {
            self.buffer.drain(..drop);
            self.offset += drop;
        }
        &self.probs[before..]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn samples_seen(&self) -> usize {
        self.offset + self.buffer.len()
    }

    /// Windows that passed the gate and were scored by the model.
    pub fn model_invocations(&self) -> u64 {
        self.invocations
    }

    pub fn finish(self) -> Result<WindowProbSeq> {
        if self.probs.is_empty() {
            return Err(Error::TooShort {
                len: self.samples_seen(),
                window: self.cfg.window_len(),
            });
        }
        Ok(WindowProbSeq {
            probs: self.probs,
            fs: self.cfg.fs,
            w_seconds: self.cfg.w_seconds,
            step_seconds: self.cfg.step_seconds,
        })
    }
}

/// Scores every grid window of `sig` with `model` (window length `w_seconds`).
pub fn window_probabilities<C: WindowClassifier>(model: C, sig: &Signal, w_seconds: u32) -> Result<WindowProbSeq> {
    let cfg = StreamConfig::new(sig.fs(), w_seconds);
    window_probabilities_with(model, sig, cfg)
}

pub fn window_probabilities_with<C: WindowClassifier>(model: C, sig: &Signal, cfg: StreamConfig) -> Result<WindowProbSeq> {
    if cfg.fs != sig.fs() {
        return Err(Error::Config(format!(
            "stream configured for {} Hz but signal is {} Hz",
            cfg.fs,
            sig.fs()
        )));
    }
    let mut det = StreamDetector::new(model, cfg)?;
    det.push(sig.samples());
    det.finish()
}

/// Broadcasts window probabilities to a per-sample map of length `len`.
///
/// Each full second takes the max over all windows covering it; samples in
/// a trailing partial second (or past the last window) carry forward the last
/// covered second's value.
pub fn confidence_map(wp: &WindowProbSeq, len: usize) -> Result<ConfidenceMap> {
    let cfg = StreamConfig {
        fs: wp.fs,
        w_seconds: wp.w_seconds,
        step_seconds: wp.step_seconds,
        gate_g: GATE_G,
    };
    cfg.validate()?;
    let expected = cfg.n_windows(len);
    if expected != wp.n_windows() || expected == 0 {
        return Err(Error::Contract(format!(
            "{} window probabilities do not match a signal of {len} samples ({expected} windows)",
            wp.n_windows()
        )));
    }
    let per_second = per_second_max(&wp.probs, wp.w_seconds as usize, wp.step_seconds as usize);
    let fs = wp.fs as usize;
    let last = per_second.len() - 1;
    let probs = (0..len).map(|i| per_second[(i / fs).min(last)]).collect();
    Ok(ConfidenceMap { probs })
}

/// Max over covering windows for every second up to the end of the last window.
fn per_second_max(probs: &[f64], w: usize, step: usize) -> Vec<f64> {
    let n = probs.len();
    let seconds = (n - 1) * step + w;
    let mut out = Vec::with_capacity(seconds);
    // Monotone deque of window indices with decreasing probabilities.
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for sec in 0..seconds {
        // Windows k with k * step <= sec < k * step + w.
        while next < n && next * step <= sec {
            while deque.back().is_some_and(|&b| probs[b] <= probs[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&f| f * step + w <= sec) {
            deque.pop_front();
        }
        out.push(deque.front().map_or(0.0, |&f| probs[f]));
    }
    out
}

/// Collapses each maximal run of windows with probability `>= tau` into one
/// detection at the run's earliest maximum.
pub fn detect(wp: &WindowProbSeq, tau: f64) -> Result<Vec<Detection>> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Threshold(tau));
    }
    let mut out = Vec::new();
    let mut region: Option<usize> = None;
    for (k, &p) in wp.probs.iter().enumerate() {
        if p >= tau {
            match region {
                Some(best) if wp.probs[best] >= p => {}
                _ => region = Some(k),
            }
        } else if let Some(best) = region.take() {
            out.push(detection_at(wp, best));
        }
    }
    if let Some(best) = region {
        out.push(detection_at(wp, best));
    }
    Ok(out)
}

fn detection_at(wp: &WindowProbSeq, k: usize) -> Detection {
    Detection {
        start_index: wp.start_index(k),
        start_seconds: wp.start_seconds(k),
        prob: wp.probs[k],
        w_seconds: wp.w_seconds,
    }
}
