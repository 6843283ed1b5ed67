use std::path::PathBuf;

use clap::Args;
use impactwatch::io::{read_dataset, read_json, write_json, write_table};
use impactwatch::tuning::{cross_validate, gain_curve, GainCurve};
use impactwatch::{Error, RunConfig};
use serde::{Deserialize, Serialize};

use super::{create_file, hash_header, meta_path, ModelMeta, TauSource};
use crate::RunArgs;

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Dataset directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Gain-curve CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Model whose sidecar receives the tuned threshold; its configuration is the base.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Optional JSON summary of the tuning run.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub config_hash: String,
    pub config: RunConfig,
    pub best_tau: f64,
    pub best_gain: f64,
    /// Mean gain at the untuned threshold 0.5, when it lies on the grid.
    pub gain_at_default: Option<f64>,
    pub folds: Vec<Vec<String>>,
}

const CURVE_COLUMNS: &[&str] = &["tau", "mean_gain", "tp", "fp", "fn", "tn"];

#[derive(Serialize)]
struct CurveRow {
    tau: f64,
    mean_gain: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tn: u64,
}

pub fn tune(args: &TuneArgs) -> impactwatch::Result<(GainCurve, TuneSummary)> {
    let meta: Option<ModelMeta> = args.model.as_ref().map(|m| read_json(&meta_path(m))).transpose()?;
    let base = meta.as_ref().map_or_else(RunConfig::default, |m| m.config.clone());
    let cfg = args.run.apply(base)?;
    if let Some(m) = &meta {
        let c = &m.config;
        if (c.w_seconds, c.step_seconds, &c.features) != (cfg.w_seconds, cfg.step_seconds, &cfg.features) || c.gate_g != cfg.gate_g {
            return Err(Error::Config("tuning window, step, gate and features must match the model".into()));
        }
    }

    let (_, signals) = read_dataset(&args.data)?;
    let (assignment, runs) = cross_validate(&signals, &cfg)?;
    let curve = gain_curve(&runs, &cfg)?;
    let summary = TuneSummary {
        config_hash: cfg.hash(),
        best_tau: curve.best_tau,
        best_gain: curve.best_gain(),
        gain_at_default: curve.gain_at(0.5),
        folds: assignment.folds,
        config: cfg,
    };

    let rows = curve.thresholds.iter().zip(&curve.mean_gain).zip(&curve.counts).map(|((&tau, &mean_gain), c)| CurveRow {
        tau,
        mean_gain,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
    });
    write_table(create_file(&args.out)?, &hash_header(&summary.config_hash), CURVE_COLUMNS, rows)?;
    if let Some(path) = &args.summary {
        write_json(path, &summary)?;
    }
    if let (Some(model), Some(mut meta)) = (&args.model, meta) {
        meta.tau = curve.best_tau;
        meta.tau_source = TauSource::Tuned;
        write_json(&meta_path(model), &meta)?;
    }
    Ok((curve, summary))
}

pub fn run(args: &TuneArgs) -> anyhow::Result<()> {
    let (_, s) = tune(args)?;
    let default = s.gain_at_default.map_or_else(|| "n/a".to_owned(), |g| format!("{g:.3}"));
    println!(
        "best tau {:.3} with mean gain {:.3} (tau 0.5: {default}) over {} folds [config {}]",
        s.best_tau,
        s.best_gain,
        s.folds.len(),
        s.config_hash
    );
    Ok(())
}
