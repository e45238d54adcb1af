use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, ClipCollection, DmosMatrix};
use crate::error::{Error, Result};

/// 1-based ascending ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 values"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of tie-averaged ranks.
/// Accepts raw scores or ranks (ranking ranks is a no-op).
pub fn srcc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Models ordered by mean DMOS on one channel; rank 1 is the highest mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRanking {
    pub channel: Channel,
    pub model_ids: Vec<String>,
    pub means: Vec<f64>,
    pub ranks: Vec<f64>,
    pub n_clips: usize,
}

impl ModelRanking {
    pub fn from_means(channel: Channel, model_ids: Vec<String>, means: Vec<f64>, n_clips: usize) -> Self {
        let negated: Vec<f64> = means.iter().map(|m| -m).collect();
        let ranks = average_ranks(&negated);
        Self {
            channel,
            model_ids,
            means,
            ranks,
            n_clips,
        }
    }

    /// Model ids sorted best first (ties by id).
    pub fn ordered(&self) -> Vec<(&str, f64, f64)> {
        let mut rows: Vec<(&str, f64, f64)> = self
            .model_ids
            .iter()
            .zip(&self.means)
            .zip(&self.ranks)
            .map(|((id, &m), &r)| (id.as_str(), m, r))
            .collect();
        rows.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(b.0)));
        rows
    }

    pub fn is_all_tied(&self) -> bool {
        self.ranks.windows(2).all(|w| w[0] == w[1])
    }
}

/// Per-model mean over the given rows of a DMOS matrix.
pub fn model_means(matrix: &DmosMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot rank models on an empty clip set"));
    }
    let mut sums = vec![0.0; matrix.n_models()];
    for &i in rows {
        for (s, v) in sums.iter_mut().zip(matrix.row(i)) {
            *s += v;
        }
    }
    let n = rows.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

pub fn rank_rows(collection: &ClipCollection, matrix: &DmosMatrix, rows: &[usize]) -> Result<ModelRanking> {
    let means = model_means(matrix, rows)?;
    Ok(ModelRanking::from_means(
        matrix.channel,
        collection.model_ids().to_vec(),
        means,
        rows.len(),
    ))
}

/// Ranks every model by its mean DMOS over the whole collection.
pub fn rank_models(collection: &ClipCollection, channel: Channel) -> Result<ModelRanking> {
    let matrix = collection.dmos_matrix(channel)?;
    let rows: Vec<usize> = (0..collection.len()).collect();
    rank_rows(collection, &matrix, &rows)
}

/// Ranks every model over the clips of a sample.
pub fn rank_sample(
    collection: &ClipCollection,
    sample: &crate::sampling::SampleManifest,
    channel: Channel,
) -> Result<ModelRanking> {
    let matrix = collection.dmos_matrix(channel)?;
    rank_rows(collection, &matrix, &sample.indices())
}
