//! Clip records, MOS scores and the DMOS derivation.
//!
//! A [`ClipCollection`] is immutable once loaded. DMOS is always derived from
//! the stored before/after MOS pairs and never stored itself.

pub(crate) mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_collection, read_embeddings, write_collection, write_embeddings, EMBEDDING_MAGIC};

pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;
pub const DEFAULT_DIM: usize = 128;

/// One of the three P.835 rating scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Sig,
    Bak,
    Ovrl,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Sig, Channel::Bak, Channel::Ovrl];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Sig => "sig",
            Channel::Bak => "bak",
            Channel::Ovrl => "ovrl",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sig" => Ok(Channel::Sig),
            "bak" => Ok(Channel::Bak),
            "ovrl" => Ok(Channel::Ovrl),
            other => Err(Error::invalid(format!(
                "unknown channel {other:?} (expected sig, bak or ovrl)"
            ))),
        }
    }
}

/// MOS for signal, background and overall quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct MosTriple {
    pub sig: f64,
    pub bak: f64,
    pub ovrl: f64,
}

impl MosTriple {
    pub fn new(sig: f64, bak: f64, ovrl: f64) -> Self {
        Self { sig, bak, ovrl }
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Sig => self.sig,
            Channel::Bak => self.bak,
            Channel::Ovrl => self.ovrl,
        }
    }

    /// First component outside `[1, 5]` (NaN counts as outside).
    pub fn out_of_range(&self) -> Option<f64> {
        [self.sig, self.bak, self.ovrl]
            .into_iter()
            .find(|v| !(MOS_MIN..=MOS_MAX).contains(v))
    }
}

impl From<[f64; 3]> for MosTriple {
    fn from([sig, bak, ovrl]: [f64; 3]) -> Self {
        Self { sig, bak, ovrl }
    }
}

impl From<MosTriple> for [f64; 3] {
    fn from(t: MosTriple) -> Self {
        [t.sig, t.bak, t.ovrl]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosPair {
    pub before: MosTriple,
    pub after: MosTriple,
}

impl MosPair {
    pub fn dmos(&self) -> DmosTriple {
        DmosTriple {
            sig: self.after.sig - self.before.sig,
            bak: self.after.bak - self.before.bak,
            ovrl: self.after.ovrl - self.before.ovrl,
        }
    }
}

/// After-minus-before MOS. Negative components mean the model degraded the
/// clip on that scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DmosTriple {
    pub sig: f64,
    pub bak: f64,
    pub ovrl: f64,
}

impl DmosTriple {
    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Sig => self.sig,
            Channel::Bak => self.bak,
            Channel::Ovrl => self.ovrl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub embedding: Vec<f32>,
    pub noise_label: Option<String>,
    pub scores: BTreeMap<String, MosPair>,
}

impl ClipRecord {
    pub fn dmos(&self, model_id: &str) -> Result<DmosTriple> {
        self.scores
            .get(model_id)
            .map(MosPair::dmos)
            .ok_or_else(|| Error::UnknownModel {
                clip_id: self.clip_id.clone(),
                model_id: model_id.to_owned(),
            })
    }
}

/// Free-function form of [`ClipRecord::dmos`].
pub fn dmos(record: &ClipRecord, model_id: &str) -> Result<DmosTriple> {
    record.dmos(model_id)
}

/// Dense row-major `n_clips × n_models` matrix of DMOS values on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DmosMatrix {
    pub channel: Channel,
    n_models: usize,
    values: Vec<f64>,
}

impl DmosMatrix {
    pub fn n_clips(&self) -> usize {
        self.values.len().checked_div(self.n_models).unwrap_or(0)
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn row(&self, clip: usize) -> &[f64] {
        &self.values[clip * self.n_models..(clip + 1) * self.n_models]
    }

    pub fn get(&self, clip: usize, model: usize) -> f64 {
        self.values[clip * self.n_models + model]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_models.max(1))
    }

    /// Mean of each row (per-clip DMOS averaged over models).
    pub fn row_means(&self) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipCollection {
    dim: usize,
    records: Vec<ClipRecord>,
    model_ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClipCollection {
    /// Validates the records and derives `model_ids` as the sorted union of
    /// every record's score keys.
    pub fn new(dim: usize, records: Vec<ClipRecord>) -> Result<Self> {
        let models: BTreeSet<&String> = records.iter().flat_map(|r| r.scores.keys()).collect();
        let model_ids = models.into_iter().cloned().collect();
        Self::with_models(dim, records, model_ids)
    }

    /// Like [`ClipCollection::new`] with an explicit model order; every score
    /// key must appear in `model_ids`.
    pub fn with_models(dim: usize, records: Vec<ClipRecord>, model_ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let known: BTreeSet<&str> = model_ids.iter().map(String::as_str).collect();
        if known.len() != model_ids.len() {
            return Err(Error::invalid("duplicate model id"));
        }
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let line = i + 1;
            validate_record(r, dim, line)?;
            if let Some(m) = r.scores.keys().find(|m| !known.contains(m.as_str())) {
                return Err(Error::UnknownModel {
                    clip_id: r.clip_id.clone(),
                    model_id: m.clone(),
                });
            }
            if index.insert(r.clip_id.clone(), i).is_some() {
                return Err(Error::DuplicateClipId {
                    clip_id: r.clip_id.clone(),
                    line,
                });
            }
        }
        Ok(Self {
            dim,
            records,
            model_ids,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ClipRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &ClipRecord {
        &self.records[i]
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn position(&self, clip_id: &str) -> Option<usize> {
        self.index.get(clip_id).copied()
    }

    /// Embeddings widened to `f64`, one row per record.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.embedding.iter().map(|&x| f64::from(x)).collect())
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.records.iter().filter(|r| r.noise_label.is_some()).count()
    }

    pub fn dmos_matrix(&self, channel: Channel) -> Result<DmosMatrix> {
        let n_models = self.model_ids.len();
        let mut values = Vec::with_capacity(self.records.len() * n_models);
        for r in &self.records {
            for m in &self.model_ids {
                let pair = r.scores.get(m).ok_or_else(|| Error::MissingScore {
                    clip_id: r.clip_id.clone(),
                    model_id: m.clone(),
                })?;
                values.push(pair.dmos().get(channel));
            }
        }
        Ok(DmosMatrix {
            channel,
            n_models,
            values,
        })
    }
}

/// Free-function form of [`ClipCollection::dmos_matrix`].
pub fn dmos_matrix(collection: &ClipCollection, channel: Channel) -> Result<DmosMatrix> {
    collection.dmos_matrix(channel)
}

pub(crate) fn validate_record(r: &ClipRecord, dim: usize, line: usize) -> Result<()> {
    if r.embedding.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: r.embedding.len(),
            clip_id: Some(r.clip_id.clone()),
        });
    }
    if r.embedding.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEmbedding {
            clip_id: r.clip_id.clone(),
            line,
        });
    }
    for (model_id, pair) in &r.scores {
        if let Some(value) = pair.before.out_of_range().or(pair.after.out_of_range()) {
            return Err(Error::MosOutOfRange {
                clip_id: r.clip_id.clone(),
                line,
                model_id: model_id.clone(),
                value,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(before: [f64; 3], after: [f64; 3]) -> MosPair {
        MosPair {
            before: before.into(),
            after: after.into(),
        }
    }

    fn record(id: &str, scores: &[(&str, MosPair)]) -> ClipRecord {
        ClipRecord {
            clip_id: id.into(),
            embedding: vec![0.0; 2],
            noise_label: None,
            scores: scores.iter().map(|(m, p)| (m.to_string(), *p)).collect(),
        }
    }

    #[test]
    fn dmos_identity_is_zero() {
        let r = record("a", &[("m", pair([3.0; 3], [3.0; 3]))]);
        assert_eq!(r.dmos("m").unwrap(), DmosTriple::default());
    }

    #[test]
    fn dmos_subtracts_componentwise() {
        let r = record("a", &[("m", pair([3.0, 3.0, 2.5], [3.0, 3.0, 3.2]))]);
        assert!((r.dmos("m").unwrap().ovrl - 0.7).abs() < 1e-12);

        let r = record("b", &[("m", pair([3.0, 2.0, 2.5], [2.8, 4.1, 3.0]))]);
        let d = dmos(&r, "m").unwrap();
        assert!((d.sig - -0.2).abs() < 1e-12);
        assert!((d.bak - 2.1).abs() < 1e-12);
        assert!((d.ovrl - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dmos_unknown_model() {
        let r = record("a", &[("m", pair([3.0; 3], [3.0; 3]))]);
        assert!(matches!(r.dmos("x"), Err(Error::UnknownModel { .. })));
    }

    #[test]
    fn dmos_matrix_single_cell() {
        let r = record("a", &[("m", pair([3.0, 3.0, 3.0], [3.0, 3.0, 3.18]))]);
        let c = ClipCollection::new(2, vec![r]).unwrap();
        let m = c.dmos_matrix(Channel::Ovrl).unwrap();
        assert_eq!(m.n_clips(), 1);
        assert!((m.get(0, 0) - 0.18).abs() < 1e-12);
    }

    #[test]
    fn dmos_matrix_all_equal_is_zero() {
        let p = pair([2.0; 3], [2.0; 3]);
        let recs = vec![record("a", &[("m1", p), ("m2", p)]), record("b", &[("m1", p), ("m2", p)])];
        let c = ClipCollection::new(2, recs).unwrap();
        for ch in Channel::ALL {
            assert!(c.dmos_matrix(ch).unwrap().rows().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dmos_matrix_matches_individual_calls() {
        let recs = vec![
            record("a", &[("m1", pair([3.0, 2.0, 2.5], [2.8, 4.1, 3.0])), ("m2", pair([1.5, 1.5, 1.5], [4.5, 1.0, 2.0]))]),
            record("b", &[("m1", pair([4.0, 4.0, 4.0], [1.0, 5.0, 3.5])), ("m2", pair([2.2, 3.3, 4.4], [2.2, 3.3, 4.4]))]),
        ];
        let c = ClipCollection::new(2, recs).unwrap();
        for ch in Channel::ALL {
            let m = c.dmos_matrix(ch).unwrap();
            for (i, r) in c.records().iter().enumerate() {
                for (j, id) in c.model_ids().iter().enumerate() {
                    assert_eq!(m.get(i, j), r.dmos(id).unwrap().get(ch));
                }
            }
        }
    }

    #[test]
    fn dmos_matrix_reports_missing_cell() {
        let p = pair([2.0; 3], [2.0; 3]);
        let recs = vec![record("a", &[("m1", p), ("m2", p)]), record("b", &[("m1", p)])];
        let c = ClipCollection::new(2, recs).unwrap();
        match c.dmos_matrix(Channel::Sig) {
            Err(Error::MissingScore { clip_id, model_id }) => {
                assert_eq!(clip_id, "b");
                assert_eq!(model_id, "m2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collection_rejects_duplicates_and_bad_scores() {
        let p = pair([2.0; 3], [2.0; 3]);
        let dup = vec![record("a", &[("m", p)]), record("a", &[("m", p)])];
        assert!(matches!(
            ClipCollection::new(2, dup),
            Err(Error::DuplicateClipId { line: 2, .. })
        ));
        let bad = vec![record("a", &[("m", pair([2.0; 3], [2.0, 2.0, 5.7]))])];
        let err = ClipCollection::new(2, bad).unwrap_err();
        assert!(err.to_string().contains("MOS out of range"));
        let mut nan = record("a", &[("m", p)]);
        nan.embedding[1] = f32::NAN;
        assert!(matches!(
            ClipCollection::new(2, vec![nan]),
            Err(Error::NonFiniteEmbedding { .. })
        ));
    }

    #[test]
    fn channel_parses() {
        assert_eq!("OVRL".parse::<Channel>().unwrap(), Channel::Ovrl);
        assert!("loud".parse::<Channel>().is_err());
    }
}
