use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use impactwatch::config::SWEEP_WINDOW_SECONDS;
use impactwatch::evaluation::{mean_and_std, metrics};
use impactwatch::io::{read_dataset, write_table};
use impactwatch::tuning::{cross_validate, gain_curve, FoldRun};
use impactwatch::{Error, RunConfig, Signal};
use serde::{Deserialize, Serialize};

use super::{create_file, hash_header};
use crate::RunArgs;

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Results CSV, one row per window size.
    #[arg(long)]
    pub out: PathBuf,
    /// Window sizes in seconds (default 3,5,7,10,15,30,60).
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<u32>>,
    #[command(flatten)]
    pub run: RunArgs,
}

const SWEEP_COLUMNS: &[&str] = &[
    "w_seconds", "best_tau", "best_gain", "gain_at_default", "tp", "fp", "fn", "tn", "precision", "recall",
    "specificity", "f1", "ba", "mean_delay", "std_delay",
];

/// Cross-validated results for one window size at its tuned threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w_seconds: u32,
    pub best_tau: f64,
    pub best_gain: f64,
    pub gain_at_default: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub ba: f64,
    pub mean_delay: Option<f64>,
    pub std_delay: Option<f64>,
}

/// No held-out subject of a fold may contribute training data to it.
fn check_participant_wise(runs: &[FoldRun], signals: &[Signal]) -> impactwatch::Result<()> {
    let mut seen = HashSet::new();
    for run in runs {
        for s in &run.test_subjects {
            if !seen.insert(s.as_str()) {
                return Err(Error::Contract(format!("subject {s} is held out by two folds")));
            }
        }
    }
    let all: HashSet<&str> = signals.iter().map(|s| s.subject_id()).collect();
    if seen != all {
        return Err(Error::Contract("folds do not cover every subject exactly once".into()));
    }
    Ok(())
}

pub fn sweep_window(signals: &[Signal], cfg: &RunConfig) -> impactwatch::Result<SweepRow> {
    let (_, runs) = cross_validate(signals, cfg)?;
    check_participant_wise(&runs, signals)?;
    let curve = gain_curve(&runs, cfg)?;
    let best = curve
        .thresholds
        .iter()
        .position(|t| *t == curve.best_tau)
        .expect("best tau is on the grid");
    let c = curve.counts[best];
    let m = metrics(&c);
    let mut delays = Vec::new();
    for run in &runs {
        for h in &run.held_out {
            delays.extend(h.evaluate(curve.best_tau, cfg.tolerance_seconds)?.delays);
        }
    }
    let ms = mean_and_std(&delays);
    Ok(SweepRow {
        w_seconds: cfg.w_seconds,
        best_tau: curve.best_tau,
        best_gain: curve.best_gain(),
        gain_at_default: curve.gain_at(0.5),
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
        precision: m.precision,
        recall: m.recall,
        specificity: m.specificity,
        f1: m.f1,
        ba: m.ba,
        mean_delay: ms.map(|x| x.0),
        std_delay: ms.map(|x| x.1),
    })
}

pub fn sweep(args: &SweepArgs) -> impactwatch::Result<Vec<SweepRow>> {
    let base = args.run.apply(RunConfig::default())?;
    let windows = args.windows.clone().unwrap_or_else(|| SWEEP_WINDOW_SECONDS.to_vec());
    if windows.is_empty() {
        return Err(Error::Config("no window sizes to sweep".into()));
    }
    let configs = windows
        .iter()
        .map(|&w| {
            let cfg = base.with_window(w);
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<impactwatch::Result<Vec<_>>>()?;
    let (_, signals) = read_dataset(&args.data)?;
    let rows = configs
        .iter()
        .map(|cfg| {
            log::info!("sweeping w = {} s", cfg.w_seconds);
            sweep_window(&signals, cfg)
        })
        .collect::<impactwatch::Result<Vec<_>>>()?;
    write_table(create_file(&args.out)?, &hash_header(&base.hash()), SWEEP_COLUMNS, &rows)?;
    Ok(rows)
}

pub fn run(args: &SweepArgs) -> anyhow::Result<()> {
    let rows = sweep(args)?;
    println!("{:>5} {:>6} {:>9} {:>6} {:>6} {:>6}", "w", "tau", "gain", "prec", "recall", "f1");
    for r in &rows {
        println!(
            "{:>5} {:>6.2} {:>9.3} {:>6.3} {:>6.3} {:>6.3}",
            r.w_seconds, r.best_tau, r.best_gain, r.precision, r.recall, r.f1
        );
    }
    Ok(())
}
