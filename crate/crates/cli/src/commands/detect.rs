use std::path::{Path, PathBuf};

use clap::Args;
use impactwatch::io::{load_signal, read_dataset, write_confidence_map, write_detections, write_json, write_window_probs};
use impactwatch::stream::StreamDetector;
use impactwatch::{confidence_map, detect, Error, IntervalQuantileModel, RunConfig, Signal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_tau, create_dir, create_file, hash_header, load_model, recording_name};
use crate::RunArgs;

pub const SUMMARY_FILE: &str = "detect.json";

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A single signal CSV.
    #[arg(long, required_unless_present = "data", conflicts_with = "data")]
    pub signal: Option<PathBuf>,
    /// A dataset directory; every recording in its manifest is processed.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sampling rate of `--signal` when its file does not state one.
    #[arg(long)]
    pub fs: Option<u32>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Decision threshold (default: the one stored with the model).
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRecord {
    pub name: String,
    pub n_samples: usize,
    pub n_windows: usize,
    pub model_invocations: u64,
    pub n_detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSummary {
    pub config_hash: String,
    pub config: RunConfig,
    pub tau: f64,
    pub recordings: Vec<DetectRecord>,
}

pub fn windows_file(name: &str) -> String {
    format!("{name}.windows.csv")
}

pub fn map_file(name: &str) -> String {
    format!("{name}.map.csv")
}

pub fn detections_file(name: &str) -> String {
    format!("{name}.detections.csv")
}

fn process(
    model: &IntervalQuantileModel,
    cfg: &RunConfig,
    tau: f64,
    name: &str,
    sig: &Signal,
    out: &Path,
) -> impactwatch::Result<DetectRecord> {
    let mut det = StreamDetector::new(model, cfg.stream(sig.fs()))?;
    det.push(sig.samples());
    let invocations = det.model_invocations();
    let wp = det.finish()?;
    let map = confidence_map(&wp, sig.len())?;
    let dets = detect(&wp, tau)?;

    let header = hash_header(&cfg.hash());
    write_window_probs(create_file(&out.join(windows_file(name)))?, &wp, sig.len(), &header)?;
    write_confidence_map(create_file(&out.join(map_file(name)))?, &map, &header)?;
    write_detections(create_file(&out.join(detections_file(name)))?, &dets, &header)?;
    Ok(DetectRecord {
        name: name.to_owned(),
        n_samples: sig.len(),
        n_windows: wp.n_windows(),
        model_invocations: invocations,
        n_detections: dets.len(),
    })
}

pub fn run_detect(args: &DetectArgs) -> impactwatch::Result<DetectSummary> {
    let (model, meta) = load_model(&args.model)?;
    let cfg = args.run.apply(meta.config.clone())?;
    if cfg.w_seconds != model.w_seconds() {
        return Err(Error::Config(format!(
            "window size {} s differs from the model's {} s",
            cfg.w_seconds,
            model.w_seconds()
        )));
    }
    let tau = check_tau(args.tau.unwrap_or(meta.tau))?;

    let recordings: Vec<(String, Signal)> = match (&args.signal, &args.data) {
        (Some(path), _) => vec![(recording_name(path), load_signal(path, None, args.fs)?)],
        (None, Some(dir)) => {
            let (manifest, signals) = read_dataset(dir)?;
            manifest
                .recordings
                .iter()
                .map(|r| recording_name(Path::new(&r.signal)))
                .zip(signals)
                .collect()
        }
        (None, None) => return Err(Error::Config("pass --signal or --data".into())),
    };
    if let Some((name, s)) = recordings.iter().find(|(_, s)| s.fs() != model.fs()) {
        return Err(Error::Config(format!(
            "{name} is sampled at {} Hz, the model at {} Hz",
            s.fs(),
            model.fs()
        )));
    }

    create_dir(&args.out)?;
    let records = recordings
        .par_iter()
        .map(|(name, sig)| process(&model, &cfg, tau, name, sig, &args.out))
        .collect::<impactwatch::Result<Vec<_>>>()?;
    let summary = DetectSummary {
        config_hash: cfg.hash(),
        config: cfg,
        tau,
        recordings: records,
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn run(args: &DetectArgs) -> anyhow::Result<()> {
    let s = run_detect(args)?;
    let n: usize = s.recordings.iter().map(|r| r.n_detections).sum();
    println!(
        "{n} detections in {} recordings at tau {:.3}, written to {} [config {}]",
        s.recordings.len(),
        s.tau,
        args.out.display(),
        s.config_hash
    );
    Ok(())
}
