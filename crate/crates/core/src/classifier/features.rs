//! Interval-quantile features.
//!
//! For each representation of a window (raw values, first difference) and
//! each dyadic interval at depths `0..=depth`, emit `m` evenly spaced
//! empirical quantiles, linearly interpolated between order statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Raw,
    FirstDifference,
}

impl Representation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Representation::Raw => 0,
            Representation::FirstDifference => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Representation::Raw),
            1 => Some(Representation::FirstDifference),
            _ => None,
        }
    }

    fn series_len(self, window_len: usize) -> usize {
        match self {
            Representation::Raw => window_len,
            Representation::FirstDifference => window_len.saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub depth: u32,
    pub quantiles_per_interval: usize,
    pub representations: Vec<Representation>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            depth: 4,
            quantiles_per_interval: 4,
            representations: vec![Representation::Raw, Representation::FirstDifference],
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.quantiles_per_interval == 0 {
            return Err(Error::Spec("at least one quantile per interval is required".into()));
        }
        if self.representations.is_empty() {
            return Err(Error::Spec("no representations selected".into()));
        }
        if self.depth > 16 {
            return Err(Error::Spec(format!("interval depth {} is too deep", self.depth)));
        }
        Ok(())
    }

    /// Number of dyadic intervals over all depths: 2^(depth+1) - 1.
    pub fn n_intervals(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub fn n_features(&self) -> usize {
        self.n_intervals() * self.quantiles_per_interval * self.representations.len()
    }

    /// Probabilities at which each interval is sampled. A single quantile is the median.
    pub fn quantile_levels(&self) -> Vec<f64> {
        let m = self.quantiles_per_interval;
        if m == 1 {
            return vec![0.5];
        }
        (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
    }

    /// Checks that every representation of a `window_len`-sample window can
    /// be split into `2^depth` non-empty intervals.
    pub fn check_window_len(&self, window_len: usize) -> Result<()> {
        let finest = 1usize << self.depth;
        for rep in &self.representations {
            let n = rep.series_len(window_len);
            if n < finest {
                return Err(Error::Spec(format!(
                    "{rep:?} series of {n} samples cannot be split into {finest} intervals"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Extracts interval-quantile features from a (standardized) window.
pub fn extract_features(values: &[f64], spec: &FeatureSpec) -> Result<FeatureVector> {
    spec.validate()?;
    spec.check_window_len(values.len())?;
    let mut out = Vec::with_capacity(spec.n_features());
    let mut scratch = Vec::with_capacity(values.len());
    let levels = spec.quantile_levels();
    let mut diff = Vec::new();
    for rep in &spec.representations {
        let series: &[f64] = match rep {
            Representation::Raw => values,
            Representation::FirstDifference => {
                diff.clear();
                diff.extend(values.windows(2).map(|p| p[1] - p[0]));
                &diff
            }
        };
        interval_quantiles(series, spec.depth, &levels, &mut scratch, &mut out);
    }
    if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite feature value {bad}")));
    }
    Ok(FeatureVector { values: out })
}

fn interval_quantiles(series: &[f64], depth: u32, levels: &[f64], scratch: &mut Vec<f64>, out: &mut Vec<f64>) {
    let n = series.len();
    for d in 0..=depth {
        let parts = 1usize << d;
        for k in 0..parts {
            let lo = k * n / parts;
            let hi = (k + 1) * n / parts;
            scratch.clear();
            scratch.extend_from_slice(&series[lo..hi]);
            scratch.sort_unstable_by(f64::total_cmp);
            out.extend(levels.iter().map(|&p| sorted_quantile(scratch, p)));
        }
    }
}

/// Linear interpolation between order statistics at position `p * (n - 1)`.
pub(crate) fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}
