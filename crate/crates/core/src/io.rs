//! CSV and JSON persistence.
//!
//! Every CSV file may start with `# key=value` comment lines carrying
//! metadata (sampling rate, subject, configuration hash); the rest is a
//! headed CSV table. Signals are stored as `t,mag` or `t,ax,ay,az`,
//! annotations as a single `impact_index` column.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Annotation, Signal, TriaxialSample};
use crate::stream::{ConfidenceMap, Detection, WindowProbSeq};
use crate::synth::{SynthConfig, SynthRecording};

pub type Header = BTreeMap<String, String>;

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

fn header_value<T: std::str::FromStr>(h: &Header, key: &str) -> Result<Option<T>> {
    match h.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Corrupt(format!("header {key}={v} is not valid"))),
    }
}

fn split_header(text: &str) -> Header {
    text.lines()
        .map(str::trim_start)
        .take_while(|l| l.starts_with('#') || l.is_empty())
        .filter_map(|l| l.trim_start_matches('#').split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn write_header<W: Write>(sink: &mut W, header: &Header) -> Result<()> {
    for (k, v) in header {
        writeln!(sink, "# {k}={v}")?;
    }
    Ok(())
}

/// Reads a metadata header and a table of `T` rows.
pub fn read_table<T: DeserializeOwned, R: Read>(mut source: R) -> Result<(Header, Vec<T>)> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let header = split_header(&text);
    let rows = csv_reader(&text).deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((header, rows))
}

/// Writes a metadata header and a table of `T` rows. `columns` must name the
/// fields of `T` in order; they are written even when there are no rows.
pub fn write_table<T: Serialize, W: Write>(
    mut sink: W,
    header: &Header,
    columns: &[&str],
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    write_header(&mut sink, header)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(columns)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(std::io::BufWriter::new(f))
}

/// Reads a signal CSV. The sampling rate comes from `fs`, else the `fs`
/// header key, else the spacing of the first two `t` values.
pub fn read_signal<R: Read>(mut source: R, fs: Option<u32>, subject_id: Option<&str>) -> Result<Signal> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let header = split_header(&text);
    let mut rdr = csv_reader(&text);
    let cols: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| cols.iter().position(|c| c == name);
    let t_col = col("t");
    let layout = match (col("mag").or_else(|| col("magnitude")), col("ax"), col("ay"), col("az")) {
        (Some(m), ..) => Layout::Magnitude(m),
        (None, Some(x), Some(y), Some(z)) => Layout::Triaxial(x, y, z),
        _ => {
            return Err(Error::Corrupt(format!(
                "signal columns {cols:?}: expected `mag` or `ax,ay,az`"
            )))
        }
    };

    let mut times = Vec::new();
    let mut mags = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Corrupt(format!("row {}: column {} is not a number", line + 1, cols[i])))
        };
        if let Some(t) = t_col {
            if times.len() < 2 {
                times.push(num(t)?);
            }
        }
        let m = match layout {
            Layout::Magnitude(m) => num(m)?,
            Layout::Triaxial(x, y, z) => TriaxialSample::new(num(x)?, num(y)?, num(z)?).magnitude()?,
        };
        mags.push(m);
    }

    let fs = match (fs, header_value::<u32>(&header, "fs")?) {
        (Some(fs), _) | (None, Some(fs)) => fs,
        (None, None) => match times.as_slice() {
            [a, b] if b > a => (1.0 / (b - a)).round() as u32,
            _ => return Err(Error::Corrupt("cannot infer the sampling rate; pass it explicitly".into())),
        },
    };
    let subject = subject_id
        .map(str::to_owned)
        .or_else(|| header.get("subject_id").cloned())
        .unwrap_or_default();
    Signal::new(mags, fs, subject, Vec::new())
}

enum Layout {
    Magnitude(usize),
    Triaxial(usize, usize, usize),
}

#[derive(Serialize, Deserialize)]
struct MagRow {
    t: f64,
    mag: f64,
}

pub fn write_signal<W: Write>(sink: W, sig: &Signal, extra: &Header) -> Result<()> {
    let mut header = extra.clone();
    header.insert("fs".into(), sig.fs().to_string());
    header.insert("subject_id".into(), sig.subject_id().to_owned());
    let fs = sig.fs() as f64;
    write_table(
        sink,
        &header,
        &["t", "mag"],
        sig.samples().iter().enumerate().map(|(i, &mag)| MagRow { t: i as f64 / fs, mag }),
    )
}

pub fn read_annotations<R: Read>(source: R) -> Result<Vec<Annotation>> {
    Ok(read_table::<Annotation, _>(source)?.1)
}

pub fn write_annotations<W: Write>(sink: W, annotations: &[Annotation], extra: &Header) -> Result<()> {
    write_table(sink, extra, &["impact_index"], annotations)
}

/// Loads a signal CSV and, if given, its annotation sidecar.
pub fn load_signal(path: &Path, annotations: Option<&Path>, fs: Option<u32>) -> Result<Signal> {
    let sig = read_signal(open(path)?, fs, None)?;
    let anns = match annotations {
        Some(p) => read_annotations(open(p)?)?,
        None => Vec::new(),
    };
    let id = sig.subject_id().to_owned();
    Signal::new(sig.samples().to_vec(), sig.fs(), id, anns)
}

#[derive(Serialize, Deserialize)]
struct MapRow {
    sample_index: usize,
    probability: f64,
}

pub fn write_confidence_map<W: Write>(sink: W, map: &ConfidenceMap, extra: &Header) -> Result<()> {
    write_table(
        sink,
        extra,
        &["sample_index", "probability"],
        map.probs.iter().enumerate().map(|(sample_index, &probability)| MapRow { sample_index, probability }),
    )
}

pub fn read_confidence_map<R: Read>(source: R) -> Result<ConfidenceMap> {
    let (_, rows) = read_table::<MapRow, _>(source)?;
    if rows.iter().enumerate().any(|(i, r)| r.sample_index != i) {
        return Err(Error::Corrupt("confidence map rows are not consecutive from 0".into()));
    }
    Ok(ConfidenceMap {
        probs: rows.into_iter().map(|r| r.probability).collect(),
    })
}

#[derive(Serialize, Deserialize)]
struct DetectionRow {
    start_index: usize,
    start_seconds: f64,
    w_seconds: u32,
    probability: f64,
}

pub fn write_detections<W: Write>(sink: W, dets: &[Detection], extra: &Header) -> Result<()> {
    write_table(
        sink,
        extra,
        &["start_index", "start_seconds", "w_seconds", "probability"],
        dets.iter().map(|d| DetectionRow {
            start_index: d.start_index,
            start_seconds: d.start_seconds,
            w_seconds: d.w_seconds,
            probability: d.prob,
        }),
    )
}

pub fn read_detections<R: Read>(source: R) -> Result<Vec<Detection>> {
    let (_, rows) = read_table::<DetectionRow, _>(source)?;
    Ok(rows
        .into_iter()
        .map(|r| Detection {
            start_index: r.start_index,
            start_seconds: r.start_seconds,
            prob: r.probability,
            w_seconds: r.w_seconds,
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct WindowRow {
    window: usize,
    start_seconds: f64,
    probability: f64,
}

/// Window probabilities plus the length of the signal they were computed on.
pub fn write_window_probs<W: Write>(sink: W, wp: &WindowProbSeq, n_samples: usize, extra: &Header) -> Result<()> {
    let mut header = extra.clone();
    header.insert("fs".into(), wp.fs.to_string());
    header.insert("w_seconds".into(), wp.w_seconds.to_string());
    header.insert("step_seconds".into(), wp.step_seconds.to_string());
    header.insert("n_samples".into(), n_samples.to_string());
    write_table(
        sink,
        &header,
        &["window", "start_seconds", "probability"],
        wp.probs.iter().enumerate().map(|(k, &probability)| WindowRow {
            window: k,
            start_seconds: wp.start_seconds(k),
            probability,
        }),
    )
}

pub fn read_window_probs<R: Read>(source: R) -> Result<(WindowProbSeq, usize)> {
    let (header, rows) = read_table::<WindowRow, _>(source)?;
    let need = |k: &str| -> Result<u64> {
        header_value::<u64>(&header, k)?.ok_or_else(|| Error::Corrupt(format!("window probability file lacks `{k}`")))
    };
    let wp = WindowProbSeq {
        fs: need("fs")? as u32,
        w_seconds: need("w_seconds")? as u32,
        step_seconds: need("step_seconds")? as u32,
        probs: rows.into_iter().map(|r| r.probability).collect(),
    };
    Ok((wp, need("n_samples")? as usize))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(path)?))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub subject_id: String,
    pub signal: String,
    pub annotations: String,
    pub n_samples: usize,
    pub n_falls: usize,
    pub rng_stream: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub config: SynthConfig,
    pub recordings: Vec<RecordingEntry>,
}

/// Writes recordings as CSV pairs plus `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig, recordings: &[SynthRecording]) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let hash = crate::config::config_hash(cfg);
    let extra: Header = [("config_hash".to_owned(), hash.clone())].into();
    let mut entries = Vec::with_capacity(recordings.len());
    for r in recordings {
        let stem = format!("{}_{:02}", r.signal.subject_id(), r.signal_index);
        let signal = format!("{stem}.csv");
        let annotations = format!("{stem}.annotations.csv");
        let mut f = create(&dir.join(&signal))?;
        write_signal(&mut f, &r.signal, &extra)?;
        f.flush()?;
        let mut f = create(&dir.join(&annotations))?;
        write_annotations(&mut f, r.signal.annotations(), &extra)?;
        f.flush()?;
        entries.push(RecordingEntry {
            subject_id: r.signal.subject_id().to_owned(),
            signal,
            annotations,
            n_samples: r.signal.len(),
            n_falls: r.signal.annotations().len(),
            rng_stream: r.stream,
        });
    }
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        config_hash: hash,
        config: cfg.clone(),
        recordings: entries,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Loads every recording listed in `dir/manifest.json`.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<Signal>)> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            found: manifest.format_version,
            supported: DATASET_FORMAT_VERSION,
        });
    }
    let signals = manifest
        .recordings
        .iter()
        .map(|r| {
            let sig = load_signal(&dir.join(&r.signal), Some(&dir.join(&r.annotations)), None)?;
            if sig.len() != r.n_samples {
                return Err(Error::Corrupt(format!(
                    "{}: {} samples, manifest says {}",
                    r.signal,
                    sig.len(),
                    r.n_samples
                )));
            }
            Ok(sig.with_subject_id(r.subject_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, signals))
}
