use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use impactwatch::evaluation::{evaluate_detections, mean_and_std, metrics, ConfusionCounts, Metrics};
use impactwatch::io::{read_annotations, read_dataset, read_detections, read_json, read_window_probs, write_json};
use impactwatch::{Annotation, Error, RunConfig};
use serde::{Deserialize, Serialize};

use super::detect::{detections_file, windows_file, DetectSummary, SUMMARY_FILE};
use super::{open_file, recording_name};
use crate::RunArgs;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Output directory of `detect`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset directory holding the annotations.
    #[arg(long, required_unless_present = "annotations", conflicts_with = "annotations")]
    pub data: Option<PathBuf>,
    /// Annotation CSV, when `detect` processed a single signal.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl DelaySummary {
    pub fn of(delays: &[f64]) -> Self {
        let ms = mean_and_std(delays);
        Self {
            n: delays.len(),
            mean: ms.map(|m| m.0),
            std: ms.map(|m| m.1),
            min: delays.iter().copied().reduce(f64::min),
            max: delays.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEval {
    pub name: String,
    pub counts: ConfusionCounts,
    pub matched_detections: usize,
    pub delays: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub tau: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub matched_detections: usize,
    pub delays: DelaySummary,
    pub recordings: Vec<RecordingEval>,
}

pub fn evaluate(args: &EvalArgs) -> impactwatch::Result<EvalReport> {
    let summary: DetectSummary = read_json(&args.pred.join(SUMMARY_FILE))?;
    let cfg = args.run.apply(summary.config.clone())?;

    let mut truth: HashMap<String, Vec<Annotation>> = HashMap::new();
    match (&args.data, &args.annotations) {
        (Some(dir), _) => {
            let (manifest, signals) = read_dataset(dir)?;
            for (entry, sig) in manifest.recordings.iter().zip(signals) {
                truth.insert(recording_name(Path::new(&entry.signal)), sig.annotations().to_vec());
            }
        }
        (None, Some(path)) => {
            let [rec] = summary.recordings.as_slice() else {
                return Err(Error::Config("--annotations needs a single-signal detect output; use --data".into()));
            };
            truth.insert(rec.name.clone(), read_annotations(open_file(path)?)?);
        }
        (None, None) => return Err(Error::Config("pass --data or --annotations".into())),
    }

    let mut counts = ConfusionCounts::default();
    let mut all_delays = Vec::new();
    let mut matched = 0;
    let mut recordings = Vec::with_capacity(summary.recordings.len());
    for rec in &summary.recordings {
        let anns = truth
            .get(&rec.name)
            .ok_or_else(|| Error::Config(format!("no annotations for recording {}", rec.name)))?;
        let (wp, n_samples) = read_window_probs(open_file(&args.pred.join(windows_file(&rec.name)))?)?;
        let dets = read_detections(open_file(&args.pred.join(detections_file(&rec.name)))?)?;
        if let Some(a) = anns.iter().find(|a| a.impact_index >= n_samples) {
            return Err(Error::Contract(format!(
                "annotation at sample {} lies beyond recording {} ({n_samples} samples)",
                a.impact_index, rec.name
            )));
        }
        let r = evaluate_detections(&dets, anns, &wp, n_samples, cfg.tolerance_seconds);
        counts += r.counts;
        matched += r.matched_detections;
        all_delays.extend_from_slice(&r.delays);
        recordings.push(RecordingEval {
            name: rec.name.clone(),
            counts: r.counts,
            matched_detections: r.matched_detections,
            delays: r.delays,
        });
    }
    Ok(EvalReport {
        config_hash: cfg.hash(),
        config: cfg,
        tau: summary.tau,
        metrics: metrics(&counts),
        counts,
        matched_detections: matched,
        delays: DelaySummary::of(&all_delays),
        recordings,
    })
}

pub fn run(args: &EvalArgs) -> anyhow::Result<()> {
    let report = evaluate(args)?;
    write_json(&args.out, &report)?;
    let m = &report.metrics;
    println!(
        "TP {} FP {} FN {} TN {}: precision {:.3} recall {:.3} specificity {:.3} F1 {:.3} BA {:.3} [config {}]",
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_,
        report.counts.tn,
        m.precision,
        m.recall,
        m.specificity,
        m.f1,
        m.ba,
        report.config_hash
    );
    if m.is_degenerate() {
        println!("undefined ratios reported as 0: {}", m.degenerate.join(", "));
    }
    Ok(())
}
