use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use impactwatch::io::{load_signal, write_json};
use impactwatch::stream::StreamDetector;
use impactwatch::synth::{generate_adl_stream, SynthConfig};
use impactwatch::{Error, IntervalQuantileModel, RunConfig, Signal};
use serde::{Deserialize, Serialize};

use super::load_model;
use crate::RunArgs;

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Signal CSV to stream; a synthetic activity recording is used otherwise.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long)]
    pub fs: Option<u32>,
    /// Length of the synthetic recording in seconds.
    #[arg(long, default_value_t = 600)]
    pub synthetic_seconds: u32,
    /// Report JSON to write; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn of(mut ms: Vec<f64>) -> Option<Self> {
        if ms.is_empty() {
            return None;
        }
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let rank = |q: f64| ms[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(Self {
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
            max_ms: ms[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub n_trees: usize,
    pub w_seconds: u32,
    pub fs: u32,
    pub n_windows: usize,
    /// Windows that passed the gate and ran the classifier.
    pub n_model_windows: usize,
    /// Every window, gate included.
    pub all_windows: LatencyStats,
    pub model_windows: Option<LatencyStats>,
    pub gated_windows: Option<LatencyStats>,
    pub windows_per_sec: f64,
}

/// Streams `sig` one step at a time and times each completed window.
pub fn bench(model: &IntervalQuantileModel, cfg: &RunConfig, sig: &Signal) -> impactwatch::Result<BenchReport> {
    let scfg = cfg.stream(sig.fs());
    let mut det = StreamDetector::new(model, scfg)?;
    let x = sig.samples();
    if x.len() < scfg.window_len() {
        return Err(Error::TooShort {
            len: x.len(),
            window: scfg.window_len(),
        });
    }
    let lead = scfg.window_len() - scfg.step_len();
    det.push(&x[..lead]);

    let (mut all, mut modeled, mut gated) = (Vec::new(), Vec::new(), Vec::new());
    let started = Instant::now();
    for chunk in x[lead..].chunks(scfg.step_len()) {
        let before = det.model_invocations();
        let t = Instant::now();
        let produced = det.push(chunk).len();
        let ms = t.elapsed().as_secs_f64() * 1e3;
        if produced == 0 {
            continue;
        }
        all.push(ms);
        if det.model_invocations() > before {
            modeled.push(ms);
        } else {
            gated.push(ms);
        }
    }
    let total = started.elapsed().as_secs_f64();
    Ok(BenchReport {
        config_hash: cfg.hash(),
        n_trees: model.n_trees(),
        w_seconds: cfg.w_seconds,
        fs: sig.fs(),
        n_windows: all.len(),
        n_model_windows: modeled.len(),
        windows_per_sec: all.len() as f64 / total.max(f64::MIN_POSITIVE),
        all_windows: LatencyStats::of(all).expect("at least one window"),
        model_windows: LatencyStats::of(modeled),
        gated_windows: LatencyStats::of(gated),
    })
}

pub fn run_bench(args: &BenchArgs) -> impactwatch::Result<BenchReport> {
    let (model, meta) = load_model(&args.model)?;
    let cfg = args.run.apply(meta.config)?;
    let sig = match &args.signal {
        Some(p) => load_signal(p, None, args.fs)?,
        None => {
            let scfg = SynthConfig {
                n_subjects: 1,
                duration_seconds: args.synthetic_seconds,
                fs: model.fs(),
                seed: cfg.seed,
                ..SynthConfig::default()
            };
            generate_adl_stream(&scfg, "bench", &mut scfg.rng_for(0))?.signal
        }
    };
    bench(&model, &cfg, &sig)
}

pub fn run(args: &BenchArgs) -> anyhow::Result<()> {
    let report = run_bench(args)?;
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            let m = report.model_windows.as_ref().unwrap_or(&report.all_windows);
            println!(
                "{} windows ({} scored): mean {:.3} ms, median {:.3} ms, p95 {:.3} ms per scored window; {:.0} windows/s",
                report.n_windows, report.n_model_windows, m.mean_ms, m.median_ms, m.p95_ms, report.windows_per_sec
            );
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}
