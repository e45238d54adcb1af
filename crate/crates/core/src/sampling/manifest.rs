//! Sample manifest as JSON lines: a header object, then one object per
//! selected clip.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SampleEntry, SampleManifest, SamplingConfig, SamplingMode};
use crate::dataset::{Channel, ClipCollection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub strategy: String,
    pub mode: SamplingMode,
    pub channel: Channel,
    pub seed: u64,
    pub budget: usize,
    pub epsilon: f64,
    pub k: Option<usize>,
}

pub fn write_manifest(manifest: &SampleManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let header = ManifestHeader {
        strategy: manifest.strategy_name.clone(),
        mode: manifest.config.mode,
        channel: manifest.config.channel,
        seed: manifest.config.seed,
        budget: manifest.config.budget,
        epsilon: manifest.config.epsilon,
        k: manifest.k,
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| io_err(e.into()))?;
    w.write_all(b"\n").map_err(io_err)?;
    for entry in &manifest.entries {
        serde_json::to_writer(&mut w, entry).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a manifest and resolves each clip against `collection`.
pub fn read_manifest(path: impl AsRef<Path>, collection: &ClipCollection) -> Result<SampleManifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));

    let parse_err = |line: usize, e: serde_json::Error| Error::Manifest {
        line,
        message: e.to_string(),
    };
    let (i, first) = lines
        .next()
        .ok_or_else(|| Error::Manifest { line: 1, message: "missing header line".into() })?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| parse_err(i + 1, e))?;

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut entry: SampleEntry = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
        entry.index = collection
            .position(&entry.clip_id)
            .ok_or_else(|| Error::UnknownClip(entry.clip_id.clone()))?;
        if !seen.insert(entry.index) {
            return Err(Error::DuplicateClipId {
                clip_id: entry.clip_id,
                line: i + 1,
            });
        }
        entries.push(entry);
    }
    if entries.len() != header.budget {
        return Err(Error::invalid(format!(
            "manifest declares budget {} but lists {} clips",
            header.budget,
            entries.len()
        )));
    }
    Ok(SampleManifest {
        entries,
        config: SamplingConfig {
            budget: header.budget,
            mode: header.mode,
            channel: header.channel,
            seed: header.seed,
            epsilon: header.epsilon,
        },
        strategy_name: header.strategy,
        k: header.k,
    })
}
