//! Deterministic synthetic accelerometer streams with injected multiphase falls.
//!
//! Background activity is 1 g plus Gaussian noise and Poisson-scheduled
//! oscillatory bursts (walking/turning surrogates), a fraction of which
//! exceed the 1.4 g gate. Falls are piecewise parametric: a free-fall dip,
//! an impact spike with exponential decay, a flat rest plateau near 1 g and
//! a low-amplitude recovery burst.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::GATE_G;
use crate::signal::{Annotation, Signal};

/// Upper bounds enforced on fall profiles so falls have bounded extent.
pub const MAX_REST_SECONDS: f64 = 30.0;
pub const MAX_RECOVERY_SECONDS: f64 = 10.0;
/// Seconds a fall can occupy after its impact point.
pub const MAX_POST_IMPACT_SECONDS: f64 = 1.0 + MAX_REST_SECONDS + MAX_RECOVERY_SECONDS;

/// Closed range a parameter is drawn uniformly from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallProfile {
    /// Magnitude reached during the falling phase, in g.
    pub pre_impact_dip: f64,
    pub impact_peak: f64,
    pub rest_duration: f64,
    /// Peak excursion above 1 g of the post-rest activity.
    pub recovery_burst: f64,
    pub recovery_duration: f64,
}

impl FallProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.impact_peak > GATE_G
            && (0.0..1.0).contains(&self.pre_impact_dip)
            && self.rest_duration > 0.0
            && self.rest_duration <= MAX_REST_SECONDS
            && self.recovery_burst >= 0.0
            && self.recovery_duration > 0.0
            && self.recovery_duration <= MAX_RECOVERY_SECONDS
            && self.impact_peak.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid fall profile {self:?}")))
        }
    }

    /// Seconds from impact to the end of recovery.
    pub fn post_impact_seconds(&self) -> f64 {
        1.0 + self.rest_duration + self.recovery_duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub signals_per_subject: usize,
    pub duration_seconds: u32,
    pub fs: u32,
    pub falls_per_signal: usize,
    /// Mean activity bursts per minute.
    pub adl_burst_rate: f64,
    /// Fraction of bursts whose peak exceeds the gate.
    pub supra_gate_fraction: f64,
    pub supra_burst_peak: Span,
    pub sub_burst_peak: Span,
    pub burst_seconds: Span,
    pub noise_std: f64,
    pub impact_peak: Span,
    pub pre_impact_dip: Span,
    pub rest_seconds: Span,
    pub recovery_burst: Span,
    pub recovery_seconds: Span,
    pub min_fall_spacing_seconds: f64,
    /// Falls are kept at least this far from either recording edge.
    pub edge_margin_seconds: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 10,
            signals_per_subject: 1,
            duration_seconds: 1200,
            fs: 100,
            falls_per_signal: 1,
            adl_burst_rate: 2.0,
            supra_gate_fraction: 0.5,
            supra_burst_peak: Span::new(1.5, 2.5),
            sub_burst_peak: Span::new(1.1, 1.35),
            burst_seconds: Span::new(2.0, 6.0),
            noise_std: 0.02,
            impact_peak: Span::new(3.0, 6.0),
            pre_impact_dip: Span::new(0.3, 0.6),
            rest_seconds: Span::new(3.0, 15.0),
            recovery_burst: Span::new(0.2, 0.35),
            recovery_seconds: Span::new(2.0, 4.0),
            min_fall_spacing_seconds: 60.0,
            // Largest sweep window (60 s) plus the default 20 s tolerance.
            edge_margin_seconds: 80.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.n_subjects == 0 || self.signals_per_subject == 0 {
            return bad("need at least one subject and one signal per subject");
        }
        if self.fs == 0 || self.duration_seconds == 0 {
            return bad("sampling rate and duration must be positive");
        }
        if !(self.adl_burst_rate >= 0.0 && self.adl_burst_rate.is_finite()) {
            return bad("burst rate must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.supra_gate_fraction) {
            return bad("supra-gate fraction must be in [0, 1]");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise std must be non-negative");
        }
        let spans = [
            self.supra_burst_peak,
            self.sub_burst_peak,
            self.burst_seconds,
            self.impact_peak,
            self.pre_impact_dip,
            self.rest_seconds,
            self.recovery_burst,
            self.recovery_seconds,
        ];
        if spans.iter().any(|s| !s.valid()) {
            return bad("every range needs finite lo <= hi");
        }
        if self.supra_burst_peak.lo <= GATE_G || self.sub_burst_peak.hi >= GATE_G || self.sub_burst_peak.lo < 1.0 {
            return bad("supra-gate bursts must peak above the gate and sub-gate bursts in [1, gate)");
        }
        if self.burst_seconds.lo < 1.0 {
            return bad("bursts must last at least 1 s");
        }
        if self.impact_peak.lo <= GATE_G {
            return bad("impact peaks must exceed the gate");
        }
        if self.pre_impact_dip.lo < 0.0 || self.pre_impact_dip.hi >= 1.0 {
            return bad("pre-impact dip must be in [0, 1) g");
        }
        if self.rest_seconds.lo <= 0.0 || self.rest_seconds.hi > MAX_REST_SECONDS {
            return bad("rest duration out of range");
        }
        if self.recovery_seconds.lo <= 0.0 || self.recovery_seconds.hi > MAX_RECOVERY_SECONDS {
            return bad("recovery duration out of range");
        }
        if self.min_fall_spacing_seconds < MAX_POST_IMPACT_SECONDS + 1.0 {
            return bad("fall spacing is shorter than a fall");
        }
        if self.edge_margin_seconds < MAX_POST_IMPACT_SECONDS {
            return bad("edge margin is shorter than a fall");
        }
        Ok(())
    }

    pub fn n_signals(&self) -> usize {
        self.n_subjects * self.signals_per_subject
    }

    pub fn subject_id(subject: usize) -> String {
        format!("S{subject:03}")
    }

    /// Generator for recording `index`: stream `index` of the seeded ChaCha generator.
    pub fn rng_for(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    pub fn sample_fall_profile<R: Rng>(&self, rng: &mut R) -> FallProfile {
        FallProfile {
            pre_impact_dip: self.pre_impact_dip.sample(rng),
            impact_peak: self.impact_peak.sample(rng),
            rest_duration: self.rest_seconds.sample(rng),
            recovery_burst: self.recovery_burst.sample(rng),
            recovery_duration: self.recovery_seconds.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub start_index: usize,
    pub len: usize,
    pub peak: f64,
    pub supra_gate: bool,
}

#[derive(Debug, Clone)]
pub struct AdlStream {
    pub signal: Signal,
    pub bursts: Vec<Burst>,
}

/// Flat-topped envelope with 0.5 s cosine ramps.
fn envelope(i: usize, len: usize, fs: usize) -> f64 {
    let ramp = (fs / 2).min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
    }
}

/// Adds one oscillatory burst peaking at `peak` g onto `out`.
fn add_burst(out: &mut [f64], peak: f64, freq_hz: f64, phase: f64, fs: usize) {
    let amp = peak - 1.0;
    let trough = 0.5 * amp.min(1.0);
    let len = out.len();
    let omega = 2.0 * std::f64::consts::PI * freq_hz / fs as f64;
    for (i, v) in out.iter_mut().enumerate() {
        let s = (omega * i as f64 + phase).sin();
        let e = envelope(i, len, fs);
        *v += e * if s > 0.0 { amp * s } else { trough * s };
    }
}

/// Background activity for one recording. No annotations.
pub fn generate_adl_stream<R: Rng>(cfg: &SynthConfig, subject_id: &str, rng: &mut R) -> Result<AdlStream> {
    cfg.validate()?;
    let fs = cfg.fs as usize;
    let n = cfg.duration_seconds as usize * fs;
    let mut samples = vec![1.0; n];
    if cfg.noise_std > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");
        samples.iter_mut().for_each(|v| *v += noise.sample(rng));
    }

    let mut bursts = Vec::new();
    if cfg.adl_burst_rate > 0.0 {
        let gaps = Exp::new(cfg.adl_burst_rate / 60.0).expect("validated rate");
        let mut t = gaps.sample(rng);
        while t < cfg.duration_seconds as f64 {
            let supra = rng.random_bool(cfg.supra_gate_fraction);
            let peak = if supra {
                cfg.supra_burst_peak.sample(rng)
            } else {
                cfg.sub_burst_peak.sample(rng)
            };
            let secs = cfg.burst_seconds.sample(rng);
            let freq = rng.random_range(1.5..2.5);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let start = (t * fs as f64) as usize;
            let end = (start + (secs * fs as f64) as usize).min(n);
            if end > start {
                add_burst(&mut samples[start..end], peak, freq, phase, fs);
                bursts.push(Burst {
                    start_index: start,
                    len: end - start,
                    peak,
                    supra_gate: supra,
                });
            }
            t += gaps.sample(rng);
        }
    }
    samples.iter_mut().for_each(|v| *v = v.max(0.0));
    let signal = Signal::new(samples, cfg.fs, subject_id, Vec::new())?;
    Ok(AdlStream { signal, bursts })
}

/// Overwrites a fall with impact at `at_seconds` and annotates it.
///
/// Phases: dip over `[at - 1, at)`, impact spike over `[at, at + 1)` peaking
/// at exactly `impact_peak`, rest plateau, then the recovery burst.
pub fn inject_fall<R: Rng>(
    sig: &mut Signal,
    at_seconds: f64,
    profile: &FallProfile,
    noise_std: f64,
    rng: &mut R,
) -> Result<Annotation> {
    profile.validate()?;
    let fs = sig.fs() as usize;
    let f = (at_seconds * fs as f64).round();
    if f.is_nan() || f < fs as f64 {
        return Err(Error::Placement(format!("impact at {at_seconds} s leaves no room for the falling phase")));
    }
    let f = f as usize;
    let rest_len = (profile.rest_duration * fs as f64).round() as usize;
    let rec_len = ((profile.recovery_duration * fs as f64).round() as usize).max(1);
    let start = f - fs;
    let end = f + fs + rest_len + rec_len;
    if end > sig.len() {
        return Err(Error::Placement(format!(
            "fall at {at_seconds} s needs samples up to {end}, signal has {}",
            sig.len()
        )));
    }
    let reach = (MAX_POST_IMPACT_SECONDS * fs as f64) as usize;
    if let Some(a) = sig
        .annotations()
        .iter()
        .find(|a| a.impact_index + reach > start && a.impact_index < end + fs)
    {
        return Err(Error::Placement(format!(
            "fall at {at_seconds} s overlaps the fall at sample {}",
            a.impact_index
        )));
    }

    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let mut jitter = |scale: f64| noise.as_ref().map_or(0.0, |n| scale * n.sample(rng));
    let out = sig.samples_mut();

    // Falling phase: ramp down to the dip within 0.3 s, then hold.
    for i in 0..fs {
        let t = i as f64 / fs as f64;
        let level = 1.0 - (1.0 - profile.pre_impact_dip) * (t / 0.3).min(1.0);
        out[start + i] = level + jitter(1.0);
    }
    // Impact: linear rise to the peak, then exponential decay towards 1 g.
    let rise = (fs / 20).max(1);
    let decay = 0.08 * fs as f64;
    for i in 0..fs {
        let v = if i < rise {
            profile.pre_impact_dip + (profile.impact_peak - profile.pre_impact_dip) * i as f64 / rise as f64
        } else if i == rise {
            profile.impact_peak
        } else {
            1.0 + (profile.impact_peak - 1.0) * (-((i - rise) as f64) / decay).exp()
        };
        let v = if i == rise { v } else { (v + jitter(1.0)).min(profile.impact_peak) };
        out[f + i] = v;
    }
    // Rest: lying still.
    for v in &mut out[f + fs..f + fs + rest_len] {
        *v = 1.0 + jitter(0.5);
    }
    // Recovery: slow low-amplitude activity.
    let rec = &mut out[f + fs + rest_len..end];
    rec.iter_mut().for_each(|v| *v = 1.0 + jitter(1.0));
    add_burst(rec, 1.0 + profile.recovery_burst, 1.2, 0.0, fs);
    for v in &mut out[start..end] {
        *v = v.max(0.0);
    }

    let ann = Annotation::new(f);
    sig.push_annotation(ann);
    Ok(ann)
}

/// Impact times (seconds) for one recording: uniform within the edge margins,
/// pairwise at least `min_fall_spacing_seconds` apart.
fn place_falls<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Result<Vec<f64>> {
    let lo = cfg.edge_margin_seconds;
    let hi = cfg.duration_seconds as f64 - cfg.edge_margin_seconds;
    if cfg.falls_per_signal > 0 && hi < lo {
        return Err(Error::Config(format!(
            "a {} s recording cannot hold falls with {} s edge margins",
            cfg.duration_seconds, cfg.edge_margin_seconds
        )));
    }
    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..MAX_ATTEMPTS {
        let mut times: Vec<f64> = Vec::with_capacity(cfg.falls_per_signal);
        for _ in 0..cfg.falls_per_signal {
            let t = rng.random_range(lo..=hi).round();
            if times.iter().all(|o| (o - t).abs() >= cfg.min_fall_spacing_seconds) {
                times.push(t);
            } else {
                break;
            }
        }
        if times.len() == cfg.falls_per_signal {
            times.sort_by(f64::total_cmp);
            return Ok(times);
        }
    }
    Err(Error::Config(format!(
        "could not place {} falls {} s apart in a {} s recording",
        cfg.falls_per_signal, cfg.min_fall_spacing_seconds, cfg.duration_seconds
    )))
}

/// One generated recording with its provenance.
#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub signal: Signal,
    pub subject_index: usize,
    pub signal_index: usize,
    pub stream: usize,
    pub bursts: Vec<Burst>,
    pub profiles: Vec<FallProfile>,
}

/// Generates every recording of the configuration, in subject order.
pub fn generate_recordings(cfg: &SynthConfig) -> Result<Vec<SynthRecording>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.n_signals());
    for subject in 0..cfg.n_subjects {
        for j in 0..cfg.signals_per_subject {
            let stream = subject * cfg.signals_per_subject + j;
            let mut rng = cfg.rng_for(stream);
            let AdlStream { mut signal, bursts } = generate_adl_stream(cfg, &SynthConfig::subject_id(subject), &mut rng)?;
            let times = place_falls(cfg, &mut rng)?;
            let mut profiles = Vec::with_capacity(times.len());
            for t in times {
                let profile = cfg.sample_fall_profile(&mut rng);
                inject_fall(&mut signal, t, &profile, cfg.noise_std, &mut rng)?;
                profiles.push(profile);
            }
            out.push(SynthRecording {
                signal,
                subject_index: subject,
                signal_index: j,
                stream,
                bursts,
                profiles,
            });
        }
    }
    Ok(out)
}

pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<Signal>> {
    Ok(generate_recordings(cfg)?.into_iter().map(|r| r.signal).collect())
}
