pub mod bench;
pub mod detect;
pub mod eval;
pub mod sweep;
pub mod synth;
pub mod train;
pub mod tune;

use std::path::{Path, PathBuf};

use impactwatch::classifier::{load_path, IntervalQuantileModel};
use impactwatch::io::{read_json, Header};
use impactwatch::{Error, RunConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    Default,
    Manual,
    Tuned,
}

/// JSON sidecar stored next to every model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config_hash: String,
    pub config: RunConfig,
    pub fs: u32,
    pub tau: f64,
    pub tau_source: TauSource,
    pub dataset_hash: String,
    pub n_falls: usize,
    pub n_adl: usize,
    pub skipped_falls: usize,
    /// Resubstitution accuracy at probability 0.5.
    pub train_accuracy: f64,
}

pub fn meta_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn load_model(path: &Path) -> impactwatch::Result<(IntervalQuantileModel, ModelMeta)> {
    let model = load_path(path)?;
    let meta: ModelMeta = read_json(&meta_path(path))?;
    if meta.config.w_seconds != model.w_seconds() || meta.fs != model.fs() {
        return Err(Error::Corrupt(format!(
            "{} does not describe the model next to it",
            meta_path(path).display()
        )));
    }
    Ok((model, meta))
}

pub fn hash_header(config_hash: &str) -> Header {
    [("config_hash".to_owned(), config_hash.to_owned())].into()
}

pub fn check_tau(tau: f64) -> impactwatch::Result<f64> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(tau)
    } else {
        Err(Error::Threshold(tau))
    }
}

/// File name without directories or the `.csv` extension.
pub fn recording_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn create_dir(dir: &Path) -> impactwatch::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

pub fn create_file(path: &Path) -> impactwatch::Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn open_file(path: &Path) -> impactwatch::Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
