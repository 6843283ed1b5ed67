//! Event-level evaluation of streaming detections.
//!
//! A detection `d = [p, p + w)` is a true positive when it overlaps the
//! asymmetric tolerance window `R = [f - (w + t), f + t)` of some annotated
//! impact `f` (IOU > 0). Each fall is counted detected at most once; extra
//! detections inside an already-detected fall's window are neither TP nor FP.
//! True negatives are counted over the decision grid: windows that overlap no
//! tolerance window and did not fire.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Annotation;
use crate::stream::{Detection, WindowProbSeq};

/// Half-open interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.end.partial_cmp(&self.start) != Some(std::cmp::Ordering::Greater)
    }

    pub fn intersection_len(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersection_len(other) > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceWindow {
    pub impact_seconds: f64,
    pub interval: Interval,
}

/// `[f - (w + t), f + t)`, clipped to `[0, signal_end)` when an end is given.
pub fn tolerance_window(impact_seconds: f64, w_seconds: f64, tolerance_seconds: f64, signal_end: Option<f64>) -> ToleranceWindow {
    let mut start = impact_seconds - (w_seconds + tolerance_seconds);
    let mut end = impact_seconds + tolerance_seconds;
    start = start.max(0.0);
    if let Some(limit) = signal_end {
        end = end.min(limit);
    }
    ToleranceWindow {
        impact_seconds,
        interval: Interval { start, end },
    }
}

/// Intersection over union of two non-empty intervals.
pub fn iou(a: &Interval, b: &Interval) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(format!(
            "IOU of an empty interval ([{}, {}) vs [{}, {}))",
            a.start, a.end, b.start, b.end
        )));
    }
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    Ok(inter / union)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// The decision grid a detection list was produced on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionGrid {
    pub n_windows: usize,
    pub w_seconds: u32,
    pub step_seconds: u32,
}

impl DecisionGrid {
    pub fn of(wp: &WindowProbSeq) -> Self {
        Self {
            n_windows: wp.n_windows(),
            w_seconds: wp.w_seconds,
            step_seconds: wp.step_seconds,
        }
    }

    fn window(&self, k: usize) -> Interval {
        let start = (k * self.step_seconds as usize) as f64;
        Interval::new(start, start + self.w_seconds as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub counts: ConfusionCounts,
    /// One delay per detected fall, in fall order.
    pub delays: Vec<f64>,
    /// Detections overlapping at least one tolerance window.
    pub matched_detections: usize,
}

fn detection_interval(d: &Detection) -> Interval {
    Interval::new(d.start_seconds, d.end_seconds())
}

/// Matches detections against tolerance windows of one signal.
///
/// A fall's delay is taken from its earliest overlapping detection.
pub fn match_detections(detections: &[Detection], falls: &[ToleranceWindow], grid: DecisionGrid) -> MatchResult {
    let mut sorted: Vec<Interval> = detections.iter().map(detection_interval).collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut falls_sorted: Vec<&ToleranceWindow> = falls.iter().collect();
    falls_sorted.sort_by(|a, b| a.interval.start.total_cmp(&b.interval.start));

    let mut counts = ConfusionCounts::default();
    let mut delays = Vec::new();
    for fall in falls {
        let earliest = sorted
            .iter()
            .take_while(|d| d.start < fall.interval.end)
            .find(|d| d.overlaps(&fall.interval));
        match earliest {
            Some(d) => {
                counts.tp += 1;
                delays.push(d.start - fall.impact_seconds);
            }
            None => counts.fn_ += 1,
        }
    }

    let mut matched = 0;
    for d in &sorted {
        let hit = falls_sorted
            .iter()
            .take_while(|f| f.interval.start < d.end)
            .any(|f| f.interval.overlaps(d));
        if hit {
            matched += 1;
        } else {
            counts.fp += 1;
        }
    }

    let fired: std::collections::HashSet<u64> = detections.iter().map(|d| d.start_seconds.to_bits()).collect();
    counts.tn = (0..grid.n_windows)
        .filter(|&k| {
            let win = grid.window(k);
            !fired.contains(&win.start.to_bits()) && !falls.iter().any(|f| f.interval.overlaps(&win))
        })
        .count() as u64;

    MatchResult {
        counts,
        delays,
        matched_detections: matched,
    }
}

/// Signed seconds from impact to the start of the detection window.
pub fn detection_delay(det: &Detection, fall: &ToleranceWindow) -> Result<f64> {
    if !detection_interval(det).overlaps(&fall.interval) {
        return Err(Error::Contract(format!(
            "detection at {} s does not overlap the tolerance window of the fall at {} s",
            det.start_seconds, fall.impact_seconds
        )));
    }
    Ok(det.start_seconds - fall.impact_seconds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub ba: f64,
    /// Ratios that had a zero denominator and were reported as 0.
    pub degenerate: Vec<String>,
}

impl Metrics {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else {
            degenerate.push(name.to_owned());
            0.0
        }
    };
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let precision = ratio("precision", tp, tp + fp);
    let recall = ratio("recall", tp, tp + fn_);
    let specificity = ratio("specificity", tn, tn + fp);
    let f1 = ratio("f1", 2.0 * precision * recall, precision + recall);
    let ba = (recall + specificity) / 2.0;
    Metrics {
        precision,
        recall,
        specificity,
        f1,
        ba,
        degenerate,
    }
}

/// Tolerance windows for every annotation of a signal of `len` samples.
pub fn tolerance_windows(annotations: &[Annotation], fs: u32, len: usize, w_seconds: u32, tolerance_seconds: f64) -> Vec<ToleranceWindow> {
    let end = len as f64 / fs as f64;
    annotations
        .iter()
        .map(|a| tolerance_window(a.impact_seconds(fs), w_seconds as f64, tolerance_seconds, Some(end)))
        .collect()
}

/// Matches the detections of one signal against its annotations.
pub fn evaluate_detections(
    detections: &[Detection],
    annotations: &[Annotation],
    wp: &WindowProbSeq,
    len: usize,
    tolerance_seconds: f64,
) -> MatchResult {
    let falls = tolerance_windows(annotations, wp.fs, len, wp.w_seconds, tolerance_seconds);
    match_detections(detections, &falls, DecisionGrid::of(wp))
}

pub fn mean_and_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn det(start: f64, w: u32) -> Detection {
        Detection {
            start_index: (start * 100.0) as usize,
            start_seconds: start,
            prob: 0.9,
            w_seconds: w,
        }
    }

    fn grid(n: usize, w: u32) -> DecisionGrid {
        DecisionGrid {
            n_windows: n,
            w_seconds: w,
            step_seconds: 1,
        }
    }

    #[test]
    fn tolerance_window_examples() {
        let r = tolerance_window(600.0, 7.0, 20.0, None);
        assert_eq!(r.impact_seconds - r.interval.start, 27.0);
        assert_eq!(r.interval.end - r.impact_seconds, 20.0);
        assert_eq!(tolerance_window(600.0, 10.0, 20.0, None).interval, Interval::new(570.0, 620.0));
        assert_eq!(tolerance_window(600.0, 10.0, 0.0, None).interval, Interval::new(590.0, 600.0));
        assert_eq!(tolerance_window(10.0, 10.0, 20.0, Some(25.0)).interval, Interval::new(0.0, 25.0));
    }

    #[test]
    fn iou_examples() {
        let a = Interval::new(0.0, 10.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &Interval::new(20.0, 30.0)).unwrap(), 0.0);
        assert_eq!(iou(&a, &Interval::new(10.0, 30.0)).unwrap(), 0.0);
        assert!((iou(&a, &Interval::new(5.0, 15.0)).unwrap() - 5.0 / 15.0).abs() < 1e-12);
        assert!(matches!(iou(&a, &Interval::new(3.0, 3.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn match_examples() {
        let fall = [tolerance_window(600.0, 10.0, 20.0, None)];
        let r = match_detections(&[det(599.0, 10)], &fall, grid(0, 10));
        assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_), (1, 0, 0));
        assert_eq!(r.delays, vec![-1.0]);

        let r = match_detections(&[], &fall, grid(0, 10));
        assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_), (0, 0, 1));

        let r = match_detections(&[det(580.0, 10), det(603.0, 10), det(900.0, 10)], &fall, grid(0, 10));
        assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_), (1, 1, 0));
        assert_eq!(r.matched_detections, 2);
        assert_eq!(r.delays, vec![-20.0]);
    }

    #[test]
    fn true_negatives_over_grid() {
        // 100 s signal, w = 10: 91 windows. R = [10, 60) overlaps windows starting 1..=59.
        let fall = [tolerance_window(40.0, 10.0, 20.0, None)];
        let r = match_detections(&[det(80.0, 10)], &fall, grid(91, 10));
        let outside = (0..91).filter(|k| *k == 0 || *k >= 60).count() as u64;
        assert_eq!(r.counts.fp, 1);
        assert_eq!(r.counts.tn + r.counts.fp, outside);
    }

    #[test]
    fn delay_examples() {
        let r = tolerance_window(600.0, 10.0, 20.0, None);
        assert_eq!(detection_delay(&det(599.0, 10), &r).unwrap(), -1.0);
        assert_eq!(detection_delay(&det(603.0, 10), &r).unwrap(), 3.0);
        assert!(matches!(detection_delay(&det(700.0, 10), &r), Err(Error::Contract(_))));
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&ConfusionCounts { tp: 19, fp: 2, fn_: 2, tn: 10_000 });
        assert!((m.precision - 19.0 / 21.0).abs() < 1e-12);
        assert!((m.recall - 19.0 / 21.0).abs() < 1e-12);
        assert!((m.precision - 0.90).abs() < 0.01);
        assert!(!m.is_degenerate());

        let m = metrics(&ConfusionCounts::default());
        assert_eq!((m.precision, m.recall, m.specificity, m.f1, m.ba), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(m.degenerate, vec!["precision", "recall", "specificity", "f1"]);

        let m = metrics(&ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 40 });
        assert_eq!(m.ba, 1.0);
        assert_eq!(m.f1, 1.0);
    }

    /// Checks every detection/fall pair directly.
    pub(crate) fn brute_force_match(dets: &[Detection], falls: &[ToleranceWindow], g: DecisionGrid) -> MatchResult {
        let mut counts = ConfusionCounts::default();
        let mut delays = Vec::new();
        let overlap = |d: &Detection, f: &ToleranceWindow| {
            let (a0, a1) = (d.start_seconds, d.start_seconds + d.w_seconds as f64);
            let (b0, b1) = (f.interval.start, f.interval.end);
            a1.min(b1) - a0.max(b0) > 0.0
        };
        for f in falls {
            let hits: Vec<&Detection> = dets.iter().filter(|d| overlap(d, f)).collect();
            match hits.iter().map(|d| d.start_seconds).reduce(f64::min) {
                Some(first) => {
                    counts.tp += 1;
                    delays.push(first - f.impact_seconds);
                }
                None => counts.fn_ += 1,
            }
        }
        let mut matched = 0;
        for d in dets {
            if falls.iter().any(|f| overlap(d, f)) {
                matched += 1;
            } else {
                counts.fp += 1;
            }
        }
        for k in 0..g.n_windows {
            let s = (k * g.step_seconds as usize) as f64;
            let probe = Detection { start_index: 0, start_seconds: s, prob: 0.0, w_seconds: g.w_seconds };
            let fired = dets.iter().any(|d| d.start_seconds == s);
            if !fired && !falls.iter().any(|f| overlap(&probe, f)) {
                counts.tn += 1;
            }
        }
        MatchResult { counts, delays, matched_detections: matched }
    }

    proptest! {
        #[test]
        fn match_agrees_with_brute_force(
            starts in prop::collection::vec(0u32..300, 0..12),
            impacts in prop::collection::vec(0.0..310.0f64, 0..4),
            w in 3u32..30,
            t in 0.0..25.0f64,
        ) {
            let mut starts = starts;
            starts.sort_unstable();
            starts.dedup();
            let dets: Vec<Detection> = starts.iter().map(|s| det(*s as f64, w)).collect();
            let falls: Vec<ToleranceWindow> = impacts.iter().map(|f| tolerance_window(*f, w as f64, t, Some(310.0))).collect();
            let g = grid(300, w);
            let got = match_detections(&dets, &falls, g);
            let want = brute_force_match(&dets, &falls, g);
            prop_assert_eq!(&got, &want);
            prop_assert_eq!(got.counts.tp + got.counts.fn_, falls.len() as u64);
            prop_assert_eq!(got.matched_detections as u64 + got.counts.fp, dets.len() as u64);
            prop_assert_eq!(got.delays.len() as u64, got.counts.tp);
            for d in &got.delays {
                prop_assert!(*d > -(2.0 * w as f64 + t) && *d < t);
            }
        }

        #[test]
        fn f1_between_precision_and_recall(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..500) {
            let m = metrics(&ConfusionCounts { tp, fp, fn_, tn });
            for v in [m.precision, m.recall, m.specificity, m.f1, m.ba] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if tp > 0 {
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            }
            prop_assert_eq!(m.ba == 1.0, fn_ == 0 && fp == 0 && tp > 0 && tn > 0);
        }
    }
}
