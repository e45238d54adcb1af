//! On-disk dataset pair: a JSON-lines manifest plus a little-endian `f32`
//! embedding matrix.
//!
//! Embedding file layout:
//!
//! ```text
//! offset 0   "AURAEMB1"          8-byte magic (format version in last byte)
//! offset 8   u32 LE count
//! offset 12  u32 LE dim
//! offset 16  count × dim f32 LE, row-major, manifest order
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_record, ClipCollection, ClipRecord, MosPair};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"AURAEMB1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRow {
    clip_id: String,
    #[serde(default)]
    noise_label: Option<String>,
    scores: BTreeMap<String, MosPair>,
}

/// Reads a `(count, dim, values)` matrix from a file with `magic`.
pub(crate) fn read_matrix_f32(path: &Path, magic: &[u8; 8]) -> Result<(usize, usize, Vec<f32>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let (count, dim) = read_header(path, &bytes, magic)?;
    let body = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::invalid("embedding header overflows"))?;
    if body.len() != expected {
        return Err(Error::Truncated {
            path: path.to_owned(),
            message: format!(
                "header declares {count}×{dim} values ({expected} bytes), body has {} bytes",
                body.len()
            ),
        });
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((count, dim, values))
}

pub(crate) fn read_header(path: &Path, bytes: &[u8], magic: &[u8; 8]) -> Result<(usize, usize)> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        let n = bytes.len().min(8);
        return Err(Error::BadMagic {
            path: path.to_owned(),
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&bytes[..n]).into_owned(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_owned(),
            message: "header shorter than 16 bytes".into(),
        });
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    Ok((count, dim))
}

pub(crate) fn header_bytes(magic: &[u8; 8], count: usize, dim: usize) -> Result<[u8; HEADER_LEN]> {
    let count = u32::try_from(count).map_err(|_| Error::invalid("row count exceeds u32"))?;
    let dim = u32::try_from(dim).map_err(|_| Error::invalid("dimension exceeds u32"))?;
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(magic);
    h[8..12].copy_from_slice(&count.to_le_bytes());
    h[12..16].copy_from_slice(&dim.to_le_bytes());
    Ok(h)
}

/// Reads an embedding file, returning `(count, dim, row-major values)`.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    read_matrix_f32(path.as_ref(), EMBEDDING_MAGIC)
}

pub fn write_embeddings(path: impl AsRef<Path>, dim: usize, rows: &[&[f32]]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * dim * 4);
    out.extend_from_slice(&header_bytes(EMBEDDING_MAGIC, rows.len(), dim)?);
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
                clip_id: None,
            });
        }
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads and validates a manifest/embedding pair. Record order follows the
/// manifest; errors name the manifest line and clip.
pub fn load_collection(
    manifest_path: impl AsRef<Path>,
    embeddings_path: impl AsRef<Path>,
) -> Result<ClipCollection> {
    let manifest_path = manifest_path.as_ref();
    let rows = read_manifest(manifest_path)?;
    let (count, dim, values) = read_embeddings(embeddings_path)?;
    if count != rows.len() {
        return Err(Error::RowCountMismatch {
            manifest: rows.len(),
            embeddings: count,
        });
    }
    if dim == 0 {
        return Err(Error::invalid("embedding file declares dimension 0"));
    }

    let mut seen = HashSet::with_capacity(rows.len());
    let mut records = Vec::with_capacity(rows.len());
    for (i, (line, row)) in rows.into_iter().enumerate() {
        let record = ClipRecord {
            clip_id: row.clip_id,
            embedding: values[i * dim..(i + 1) * dim].to_vec(),
            noise_label: row.noise_label,
            scores: row.scores,
        };
        validate_record(&record, dim, line)?;
        if !seen.insert(record.clip_id.clone()) {
            return Err(Error::DuplicateClipId {
                clip_id: record.clip_id,
                line,
            });
        }
        records.push(record);
    }
    ClipCollection::new(dim, records)
}

fn read_manifest(path: &Path) -> Result<Vec<(usize, ManifestRow)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            line: line_no,
            message: e.to_string(),
        })?;
        rows.push((line_no, row));
    }
    Ok(rows)
}

/// Writes the canonical manifest/embedding pair for `collection`.
pub fn write_collection(
    collection: &ClipCollection,
    manifest_path: impl AsRef<Path>,
    embeddings_path: impl AsRef<Path>,
) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let file = File::create(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let mut w = BufWriter::new(file);
    for r in collection.records() {
        let row = ManifestRow {
            clip_id: r.clip_id.clone(),
            noise_label: r.noise_label.clone(),
            scores: r.scores.clone(),
        };
        serde_json::to_writer(&mut w, &row).map_err(|e| Error::io(manifest_path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(manifest_path, e))?;
    }
    w.flush().map_err(|e| Error::io(manifest_path, e))?;

    let rows: Vec<&[f32]> = collection.records().iter().map(|r| r.embedding.as_slice()).collect();
    write_embeddings(embeddings_path, collection.dim(), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MosTriple;

    fn write_manifest(path: &Path, lines: &[String]) {
        std::fs::write(path, lines.join("\n") + "\n").unwrap();
    }

    fn row(id: &str, ovrl_before: f64) -> String {
        format!(
            r#"{{"clip_id":"{id}","noise_label":"dog","scores":{{"m1":{{"before":[3,3,{ovrl_before}],"after":[3.5,3.5,3.5]}},"m2":{{"before":[2,2,2],"after":[2,2,2]}}}}}}"#
        )
    }

    fn emb(path: &Path, count: usize, dim: usize) {
        let rows: Vec<Vec<f32>> = (0..count).map(|i| vec![i as f32; dim]).collect();
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        write_embeddings(path, dim, &refs).unwrap();
    }

    #[test]
    fn loads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[row("a", 3.0), row("b", 3.0), row("c", 3.0)]);
        emb(&e, 3, 128);
        let c = load_collection(&m, &e).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.dim(), 128);
        assert_eq!(c.model_ids(), ["m1", "m2"]);
        assert_eq!(c.record(2).clip_id, "c");
        assert_eq!(c.record(2).embedding[0], 2.0);
        assert_eq!(c.record(0).scores["m1"].before, MosTriple::new(3.0, 3.0, 3.0));
    }

    #[test]
    fn row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[row("a", 3.0), row("b", 3.0), row("c", 3.0)]);
        emb(&e, 2, 128);
        let err = load_collection(&m, &e).unwrap_err();
        assert!(err.to_string().contains("row-count mismatch"), "{err}");
    }

    #[test]
    fn mos_out_of_range_names_clip_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[row("a", 3.0), row("bad", 5.7), row("c", 3.0)]);
        emb(&e, 3, 4);
        let err = load_collection(&m, &e).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("MOS out of range") && msg.contains("bad") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[row("a", 3.0)]);
        std::fs::write(&e, b"NOTMAGIC\x01\0\0\0\x01\0\0\0\0\0\0\0").unwrap();
        assert!(load_collection(&m, &e).unwrap_err().to_string().contains("bad magic"));

        emb(&e, 1, 4);
        let mut bytes = std::fs::read(&e).unwrap();
        bytes.pop();
        std::fs::write(&e, bytes).unwrap();
        assert!(matches!(load_collection(&m, &e), Err(Error::Truncated { .. })));
    }

    #[test]
    fn duplicate_and_nonfinite() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[row("a", 3.0), row("a", 3.0)]);
        emb(&e, 2, 4);
        assert!(matches!(
            load_collection(&m, &e),
            Err(Error::DuplicateClipId { line: 2, .. })
        ));

        write_manifest(&m, &[row("a", 3.0)]);
        write_embeddings(&e, 2, &[&[1.0, f32::INFINITY]]).unwrap();
        assert!(matches!(
            load_collection(&m, &e),
            Err(Error::NonFiniteEmbedding { line: 1, .. })
        ));
    }

    #[test]
    fn malformed_json_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[row("a", 3.0), "{not json".into()]);
        emb(&e, 2, 4);
        assert!(matches!(load_collection(&m, &e), Err(Error::Manifest { line: 2, .. })));
    }

    #[test]
    fn null_label_is_allowed() {
        let dir = tempfile::tempdir().unwrap();
        let (m, e) = (dir.path().join("m.jsonl"), dir.path().join("e.bin"));
        write_manifest(&m, &[r#"{"clip_id":"x","noise_label":null,"scores":{}}"#.into()]);
        emb(&e, 1, 3);
        let c = load_collection(&m, &e).unwrap();
        assert_eq!(c.record(0).noise_label, None);
        assert_eq!(c.labeled_count(), 0);
    }
}
