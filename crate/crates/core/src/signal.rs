//! Core signal types, tri-axial magnitude aggregation and per-window
//! z-normalization.
//!
//! All magnitudes are in g units (1 g = 9.81 m/s²). Magnitude is always
//! computed before standardization, and physical thresholds such as the
//! 1.4 g gate must be applied to raw magnitudes only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tri-axial accelerometer reading, in g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriaxialSample {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl TriaxialSample {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self { ax, ay, az }
    }

    /// Euclidean norm of the three axes. Invariant to sensor rotation.
    pub fn magnitude(&self) -> Result<f64> {
        magnitude(self)
    }
}

pub fn magnitude(s: &TriaxialSample) -> Result<f64> {
    if !(s.ax.is_finite() && s.ay.is_finite() && s.az.is_finite()) {
        return Err(Error::InvalidSample(format!(
            "non-finite component in ({}, {}, {})",
            s.ax, s.ay, s.az
        )));
    }
    // Summing in a fixed order makes the result exactly invariant under axis
    // permutation, not just up to rounding.
    let mut sq = [s.ax * s.ax, s.ay * s.ay, s.az * s.az];
    sq.sort_by(f64::total_cmp);
    Ok((sq[0] + sq[1] + sq[2]).sqrt())
}

/// Ground-truth impact point of a fall, as a sample index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub impact_index: usize,
}

impl Annotation {
    pub fn new(impact_index: usize) -> Self {
        Self { impact_index }
    }

    pub fn impact_seconds(&self, fs: u32) -> f64 {
        self.impact_index as f64 / fs as f64
    }
}

/// A univariate acceleration-magnitude recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs: u32,
    subject_id: String,
    annotations: Vec<Annotation>,
}

impl Signal {
    pub fn new(
        samples: Vec<f64>,
        fs: u32,
        subject_id: impl Into<String>,
        mut annotations: Vec<Annotation>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if fs == 0 {
            return Err(Error::InvalidSignal("sampling rate must be positive".into()));
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidSignal(format!(
                "magnitude at index {i} is {v}; magnitudes must be finite and non-negative"
            )));
        }
        if let Some(a) = annotations.iter().find(|a| a.impact_index >= samples.len()) {
            return Err(Error::InvalidSignal(format!(
                "annotation at index {} outside signal of {} samples",
                a.impact_index,
                samples.len()
            )));
        }
        annotations.sort_unstable();
        Ok(Self {
            samples,
            fs,
            subject_id: subject_id.into(),
            annotations,
        })
    }

    /// Builds a signal from tri-axial readings by aggregating each to its magnitude.
    pub fn from_triaxial(
        samples: &[TriaxialSample],
        fs: u32,
        subject_id: impl Into<String>,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let mags = samples.iter().map(magnitude).collect::<Result<Vec<_>>>()?;
        Self::new(mags, fs, subject_id, annotations)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.fs as f64
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub(crate) fn push_annotation(&mut self, a: Annotation) {
        self.annotations.push(a);
        self.annotations.sort_unstable();
    }

    pub fn with_subject_id(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }
}

/// A fixed-length contiguous slice of a signal: the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub values: Vec<f64>,
    pub start_index: usize,
    pub w_seconds: u32,
}

impl Window {
    /// Copies `w_seconds * fs` samples starting at `start_index` out of `sig`.
    pub fn from_signal(sig: &Signal, start_index: usize, w_seconds: u32) -> Result<Self> {
        let len = w_seconds as usize * sig.fs() as usize;
        let end = start_index + len;
        if end > sig.len() {
            return Err(Error::Boundary {
                start: start_index as i64,
                end: end as i64,
                len: sig.len(),
            });
        }
        Ok(Self {
            values: sig.samples()[start_index..end].to_vec(),
            start_index,
            w_seconds,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Z-normalizes a window with its own mean and population standard deviation.
///
/// A zero-variance window maps to all zeros.
pub fn standardize(win: &Window) -> Window {
    let mut values = win.values.clone();
    standardize_in_place(&mut values);
    Window {
        values,
        start_index: win.start_index,
        w_seconds: win.w_seconds,
    }
}

pub fn standardize_in_place(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 && std.is_finite() {
        values.iter_mut().for_each(|v| *v = (*v - mean) / std);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}
