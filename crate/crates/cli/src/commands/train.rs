use std::path::PathBuf;

use clap::Args;
use impactwatch::classifier::save_path;
use impactwatch::io::{read_dataset, write_json};
use impactwatch::segmentation::build_training_set;
use impactwatch::{fit, IntervalQuantileModel, RunConfig};

use super::{check_tau, meta_path, ModelMeta, TauSource};
use crate::RunArgs;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file; metadata goes to `<model>.json`.
    #[arg(long)]
    pub model: PathBuf,
    /// Decision threshold stored with the model (default 0.5).
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn train(args: &TrainArgs) -> impactwatch::Result<(IntervalQuantileModel, ModelMeta)> {
    let cfg = args.run.apply(RunConfig::default())?;
    let tau = check_tau(args.tau.unwrap_or(0.5))?;
    let (manifest, signals) = read_dataset(&args.data)?;
    let ts = build_training_set(&signals, cfg.w_seconds, &cfg.segmentation())?;
    let model = fit(&ts, &cfg.features, &cfg.forest())?;

    let correct = ts
        .segments
        .iter()
        .map(|s| model.predict_values(&s.window.values).map(|p| (p >= 0.5) == s.label.is_fall()))
        .collect::<impactwatch::Result<Vec<bool>>>()?
        .into_iter()
        .filter(|c| *c)
        .count();
    let meta = ModelMeta {
        config_hash: cfg.hash(),
        fs: ts.fs,
        tau,
        tau_source: if args.tau.is_some() { TauSource::Manual } else { TauSource::Default },
        dataset_hash: manifest.config_hash,
        n_falls: ts.n_falls(),
        n_adl: ts.n_adl(),
        skipped_falls: ts.skipped_falls,
        train_accuracy: correct as f64 / ts.len() as f64,
        config: cfg,
    };
    save_path(&model, &args.model)?;
    write_json(&meta_path(&args.model), &meta)?;
    Ok((model, meta))
}

pub fn run(args: &TrainArgs) -> anyhow::Result<()> {
    let (model, meta) = train(args)?;
    println!(
        "trained {} trees on {} fall and {} ADL windows (w = {} s, {} falls skipped), training accuracy {:.4} [config {}]",
        model.n_trees(),
        meta.n_falls,
        meta.n_adl,
        meta.config.w_seconds,
        meta.skipped_falls,
        meta.train_accuracy,
        meta.config_hash
    );
    Ok(())
}
