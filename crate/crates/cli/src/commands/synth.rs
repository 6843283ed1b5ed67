use std::path::PathBuf;

use clap::Args;
use impactwatch::io::{read_json, write_dataset, DatasetManifest};
use impactwatch::synth::{generate_recordings, SynthConfig};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for recordings and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON generator configuration used as the base for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub signals_per_subject: Option<usize>,
    /// Recording length in seconds.
    #[arg(long)]
    pub duration: Option<u32>,
    /// Falls per recording.
    #[arg(long)]
    pub falls: Option<usize>,
    #[arg(long)]
    pub fs: Option<u32>,
    /// Activity bursts per minute.
    #[arg(long)]
    pub burst_rate: Option<f64>,
    /// Fraction of bursts exceeding the impact gate.
    #[arg(long)]
    pub supra_fraction: Option<f64>,
    /// Sensor noise standard deviation in g.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SynthArgs {
    pub fn config(&self) -> impactwatch::Result<SynthConfig> {
        let base: SynthConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => SynthConfig::default(),
        };
        let cfg = SynthConfig {
            n_subjects: self.subjects.unwrap_or(base.n_subjects),
            signals_per_subject: self.signals_per_subject.unwrap_or(base.signals_per_subject),
            duration_seconds: self.duration.unwrap_or(base.duration_seconds),
            falls_per_signal: self.falls.unwrap_or(base.falls_per_signal),
            fs: self.fs.unwrap_or(base.fs),
            adl_burst_rate: self.burst_rate.unwrap_or(base.adl_burst_rate),
            supra_gate_fraction: self.supra_fraction.unwrap_or(base.supra_gate_fraction),
            noise_std: self.noise.unwrap_or(base.noise_std),
            seed: self.seed.unwrap_or(base.seed),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn synth(args: &SynthArgs) -> impactwatch::Result<DatasetManifest> {
    let cfg = args.config()?;
    let recordings = generate_recordings(&cfg)?;
    write_dataset(&args.out, &cfg, &recordings)
}

pub fn run(args: &SynthArgs) -> anyhow::Result<()> {
    let manifest = synth(args)?;
    let falls: usize = manifest.recordings.iter().map(|r| r.n_falls).sum();
    let hours = manifest.recordings.iter().map(|r| r.n_samples).sum::<usize>() as f64
        / manifest.config.fs as f64
        / 3600.0;
    println!(
        "wrote {} recordings ({falls} falls, {hours:.2} h) to {} [config {}]",
        manifest.recordings.len(),
        args.out.display(),
        manifest.config_hash
    );
    Ok(())
}
