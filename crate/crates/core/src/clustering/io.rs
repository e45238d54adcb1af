//! Cluster model sidecar.
//!
//! ```text
//! offset 0   "AURACLU1"           8-byte magic
//! offset 8   u32 LE k
//! offset 12  u32 LE dim
//! offset 16  k × dim f64 LE centroids, row-major
//!            u32 LE n
//!            n × u32 LE assignments
//! ```
//!
//! The JSON summary next to it carries k, the Davies–Bouldin index and the
//! cluster sizes.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClusterModel;
use crate::dataset::io::{header_bytes, read_header};
use crate::error::{Error, Result};

pub const CLUSTER_MAGIC: &[u8; 8] = b"AURACLU1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub dim: usize,
    pub db_index: Option<f64>,
    pub inertia: f64,
    pub iterations_run: usize,
    pub sizes: Vec<usize>,
}

impl From<&ClusterModel> for ClusterSummary {
    fn from(m: &ClusterModel) -> Self {
        Self {
            k: m.k,
            dim: m.dim(),
            db_index: m.db_index,
            inertia: m.inertia,
            iterations_run: m.iterations_run,
            sizes: m.sizes(),
        }
    }
}

pub fn write_model(model: &ClusterModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = model.dim();
    let mut out = Vec::with_capacity(20 + model.k * dim * 8 + model.assignments.len() * 4);
    out.extend_from_slice(&header_bytes(CLUSTER_MAGIC, model.k, dim)?);
    for c in &model.centroids {
        for v in c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let n = u32::try_from(model.assignments.len()).map_err(|_| Error::invalid("too many points"))?;
    out.extend_from_slice(&n.to_le_bytes());
    for &a in &model.assignments {
        out.extend_from_slice(&(a as u32).to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_summary(model: &ClusterModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(&ClusterSummary::from(model)).expect("summary serializes");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a sidecar back. Inertia, iteration count and history are not
/// stored; inertia comes back as NaN until recomputed.
pub fn read_model(path: impl AsRef<Path>) -> Result<ClusterModel> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let (k, dim) = read_header(path, &bytes, CLUSTER_MAGIC)?;
    let truncated = |what: &str| Error::Truncated {
        path: path.to_owned(),
        message: format!("missing {what}"),
    };

    let mut pos = 16;
    let centroid_bytes = k * dim * 8;
    let block = bytes.get(pos..pos + centroid_bytes).ok_or_else(|| truncated("centroids"))?;
    let flat: Vec<f64> = block
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let centroids: Vec<Vec<f64>> = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
    pos += centroid_bytes;

    let n_bytes = bytes.get(pos..pos + 4).ok_or_else(|| truncated("assignment count"))?;
    let n = u32::from_le_bytes(n_bytes.try_into().unwrap()) as usize;
    pos += 4;
    let block = bytes.get(pos..pos + n * 4).ok_or_else(|| truncated("assignments"))?;
    if bytes.len() != pos + n * 4 {
        return Err(Error::invalid(format!("{}: trailing bytes", path.display())));
    }
    let assignments: Vec<usize> = block
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    if let Some(&a) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::invalid(format!("assignment {a} out of range for k = {k}")));
    }
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        db_index: None,
        inertia: f64::NAN,
        iterations_run: 0,
        inertia_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{kmeanspp_init, lloyd};

    #[test]
    fn sidecar_round_trip() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 4) as f64 * 5.0, (i as f64).sin()]).collect();
        let init = kmeanspp_init(&pts, 4, 2).unwrap();
        let model = lloyd(&pts, &init, 100, 1e-9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        write_model(&model, &p).unwrap();
        let back = read_model(&p).unwrap();
        assert_eq!(back.k, model.k);
        assert_eq!(back.centroids, model.centroids);
        assert_eq!(back.assignments, model.assignments);

        write_summary(&model, dir.path().join("c.json")).unwrap();
        let s: ClusterSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
        assert_eq!(s.sizes.iter().sum::<usize>(), 40);
        assert_eq!(s.k, 4);
    }

    #[test]
    fn sidecar_rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        std::fs::write(&p, b"AURAEMB1\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_model(&p), Err(Error::BadMagic { .. })));
    }
}
