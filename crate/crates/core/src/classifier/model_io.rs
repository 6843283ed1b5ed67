//! Binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            4 bytes   "IWQM"
//! version          u32       MODEL_FORMAT_VERSION
//! w_seconds        u32
//! fs               u32
//! depth            u32
//! quantiles        u32
//! n_reps           u8        followed by n_reps representation codes (u8; 0 raw, 1 first difference)
//! n_features       u32       must equal the count implied by the spec
//! n_trees          u32
//! per tree:
//!   n_nodes        u32
//!   per node:
//!     tag          u8        0 = leaf, 1 = split
//!     leaf:        f64       fall fraction in [0, 1]
//!     split:       u32 feature, f64 threshold, u32 left, u32 right
//! ```
//!
//! Child indices must point forward within the same tree. Trailing bytes
//! after the last tree are rejected.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::features::{FeatureSpec, Representation};
use super::tree::{ExtraTree, Node};
use super::IntervalQuantileModel;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"IWQM";

pub fn save<W: Write>(model: &IntervalQuantileModel, sink: &mut W) -> Result<()> {
    sink.write_all(MAGIC)?;
    sink.write_u32::<LittleEndian>(MODEL_FORMAT_VERSION)?;
    sink.write_u32::<LittleEndian>(model.w_seconds)?;
    sink.write_u32::<LittleEndian>(model.fs)?;
    sink.write_u32::<LittleEndian>(model.spec.depth)?;
    sink.write_u32::<LittleEndian>(model.spec.quantiles_per_interval as u32)?;
    sink.write_u8(model.spec.representations.len() as u8)?;
    for rep in &model.spec.representations {
        sink.write_u8(rep.code())?;
    }
    sink.write_u32::<LittleEndian>(model.spec.n_features() as u32)?;
    sink.write_u32::<LittleEndian>(model.trees.len() as u32)?;
    for tree in &model.trees {
        sink.write_u32::<LittleEndian>(tree.nodes.len() as u32)?;
        for node in &tree.nodes {
            match *node {
                Node::Leaf { fall_fraction } => {
                    sink.write_u8(0)?;
                    sink.write_f64::<LittleEndian>(fall_fraction)?;
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    sink.write_u8(1)?;
                    sink.write_u32::<LittleEndian>(feature)?;
                    sink.write_f64::<LittleEndian>(threshold)?;
                    sink.write_u32::<LittleEndian>(left)?;
                    sink.write_u32::<LittleEndian>(right)?;
                }
            }
        }
    }
    Ok(())
}

pub fn save_path(model: &IntervalQuantileModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load<R: Read>(source: &mut R) -> Result<IntervalQuantileModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn load_path(path: impl AsRef<Path>) -> Result<IntervalQuantileModel> {
    load(&mut File::open(path)?)
}

fn truncated<E>(_: E) -> Error {
    Error::Corrupt("unexpected end of payload".into())
}

fn parse(bytes: &[u8]) -> Result<IntervalQuantileModel> {
    let mut cur = bytes;
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    if version == 0 || version > MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let w_seconds = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    let fs = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    let depth = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    let quantiles = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let n_reps = cur.read_u8().map_err(truncated)?;
    let mut representations = Vec::with_capacity(n_reps as usize);
    for _ in 0..n_reps {
        let code = cur.read_u8().map_err(truncated)?;
        representations.push(
            Representation::from_code(code).ok_or_else(|| Error::Corrupt(format!("unknown representation {code}")))?,
        );
    }
    let spec = FeatureSpec {
        depth,
        quantiles_per_interval: quantiles,
        representations,
    };
    spec.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
    if w_seconds == 0 || fs == 0 {
        return Err(Error::Corrupt("zero window length or sampling rate".into()));
    }
    let n_features = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    if n_features != spec.n_features() {
        return Err(Error::Corrupt(format!(
            "header declares {n_features} features, spec implies {}",
            spec.n_features()
        )));
    }
    let n_trees = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    if n_trees == 0 {
        return Err(Error::Corrupt("empty ensemble".into()));
    }
    let mut trees = Vec::with_capacity(n_trees.min(4096));
    for t in 0..n_trees {
        let n_nodes = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        if n_nodes == 0 {
            return Err(Error::Corrupt(format!("tree {t} has no nodes")));
        }
        // Smallest node is 9 bytes; reject counts the payload cannot hold.
        if n_nodes > cur.len() / 9 {
            return Err(truncated(()));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for id in 0..n_nodes {
            let node = match cur.read_u8().map_err(truncated)? {
                0 => {
                    let fall_fraction = cur.read_f64::<LittleEndian>().map_err(truncated)?;
                    if !(0.0..=1.0).contains(&fall_fraction) {
                        return Err(Error::Corrupt(format!("leaf value {fall_fraction} outside [0, 1]")));
                    }
                    Node::Leaf { fall_fraction }
                }
                1 => {
                    let feature = cur.read_u32::<LittleEndian>().map_err(truncated)?;
                    let threshold = cur.read_f64::<LittleEndian>().map_err(truncated)?;
                    let left = cur.read_u32::<LittleEndian>().map_err(truncated)?;
                    let right = cur.read_u32::<LittleEndian>().map_err(truncated)?;
                    let child_ok = |c: u32| (c as usize) > id && (c as usize) < n_nodes;
                    if feature as usize >= n_features || !threshold.is_finite() || !child_ok(left) || !child_ok(right) {
                        return Err(Error::Corrupt(format!("invalid split node {id} in tree {t}")));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                tag => return Err(Error::Corrupt(format!("unknown node tag {tag}"))),
            };
            nodes.push(node);
        }
        trees.push(ExtraTree { nodes });
    }
    if !cur.is_empty() {
        return Err(Error::Corrupt(format!("{} trailing bytes", cur.len())));
    }
    Ok(IntervalQuantileModel {
        spec,
        trees,
        w_seconds,
        fs,
    })
}
