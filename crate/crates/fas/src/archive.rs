//! On-disk formats: the versioned JSON model archive and the data-batch
//! archive (JSON header line plus a raw little-endian `f64` payload).
//!
//! JSON numbers are serialized with shortest-round-trip decimal encoding,
//! so every `f64` parameter survives a save/load cycle bit-exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::cd::{CdTrainConfig, MixtureExpertSet};
use crate::data::DataBatch;
use crate::error::{Error, Result};
use crate::pl::{PlModel, PlTrainConfig};
use crate::simple::{SimpleTrainConfig, StudentTExpertSet};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const BATCH_FORMAT_VERSION: u32 = 1;

/// A trained model plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ArchivedModel {
    Simple {
        model: StudentTExpertSet,
        config: SimpleTrainConfig,
    },
    Pl {
        model: PlModel,
        config: PlTrainConfig,
    },
    Cd {
        model: MixtureExpertSet,
        config: CdTrainConfig,
    },
}

/// Versioned on-disk representation of any trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    /// Unix timestamp. Honors `SOURCE_DATE_EPOCH` so archives written with
    /// identical seeds can be byte-identical across runs.
    pub created_unix: u64,
    #[serde(flatten)]
    pub body: ArchivedModel,
}

fn creation_timestamp() -> u64 {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(t) = v.parse() {
            return t;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl ModelArchive {
    pub fn new(body: ArchivedModel) -> Self {
        ModelArchive {
            format_version: MODEL_FORMAT_VERSION,
            created_unix: creation_timestamp(),
            body,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Archive(e.to_string()))?;
        let mut f = fs::File::create(path)?;
        f.write_all(json.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let archive: ModelArchive =
            serde_json::from_str(&text).map_err(|e| Error::Archive(e.to_string()))?;
        if archive.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Archive(format!(
                "unsupported format version {}",
                archive.format_version
            )));
        }
        Ok(archive)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchHeader {
    format_version: u32,
    kind: String,
    n: usize,
    count: usize,
    payload: String,
}

/// Write a data batch: one JSON header line, then `count * n` raw
/// little-endian `f64` values.
pub fn save_batch(batch: &DataBatch, path: impl AsRef<Path>) -> Result<()> {
    let header = BatchHeader {
        format_version: BATCH_FORMAT_VERSION,
        kind: "data_batch".into(),
        n: batch.n(),
        count: batch.count(),
        payload: "f64le".into(),
    };
    let mut f = fs::File::create(path)?;
    let json = serde_json::to_string(&header).map_err(|e| Error::Archive(e.to_string()))?;
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(batch.values().len() * 8);
    for &v in batch.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_batch(path: impl AsRef<Path>) -> Result<DataBatch> {
    let mut f = fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Archive("missing header line".into()))?;
    let header: BatchHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Archive(e.to_string()))?;
    if header.format_version != BATCH_FORMAT_VERSION || header.kind != "data_batch" {
        return Err(Error::Archive("not a data-batch archive".into()));
    }
    if header.payload != "f64le" {
        return Err(Error::Archive(format!(
            "unsupported payload encoding {}",
            header.payload
        )));
    }
    let payload = &bytes[newline + 1..];
    let expected = header.n * header.count * 8;
    if payload.len() != expected {
        return Err(Error::Archive(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DataBatch::from_values(header.n.max(1), values)
}
