//! Sample quality: χ² coverage of clusters, Spearman fidelity of model
//! rankings, out-of-distribution share and mean DMOS.

mod bootstrap;
mod ood;
mod rank;
pub mod special;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::dataset::{Channel, ClipCollection};
use crate::error::{Error, Result};
use crate::sampling::SampleManifest;

pub use bootstrap::{
    bootstrap_rounds, bootstrap_srcc, fidelity, percentile, round_seed, RankingFidelity, Round, DEFAULT_ROUNDS,
};
pub use ood::{ood_fraction, ood_of_indices, top_categories, top_categories_of_indices, CategoryCounts, OodReport};
pub use rank::{average_ranks, model_means, pearson, rank_models, rank_rows, rank_sample, srcc, ModelRanking};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub chi2: f64,
    pub p_value: f64,
    pub cluster_counts: Vec<usize>,
}

/// χ² distance between the sample's spread over clusters and a uniform
/// spread, computed on percentages so the statistic does not depend on the
/// sample size. The p-value uses k − 1 degrees of freedom.
pub fn chi_square_uniformity(cluster_counts: &[usize]) -> Result<DiversityReport> {
    let k = cluster_counts.len();
    if k < 2 {
        return Err(Error::invalid("χ² uniformity needs at least 2 clusters"));
    }
    let total: usize = cluster_counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("all cluster counts are zero"));
    }
    let expected = 100.0 / k as f64;
    let chi2: f64 = cluster_counts
        .iter()
        .map(|&c| {
            let pct = 100.0 * c as f64 / total as f64;
            (pct - expected) * (pct - expected) / expected
        })
        .sum();
    Ok(DiversityReport {
        chi2,
        p_value: special::chi_square_sf(chi2, (k - 1) as f64),
        cluster_counts: cluster_counts.to_vec(),
    })
}

/// Number of sampled clips per cluster of `model`.
pub fn cluster_counts(model: &ClusterModel, indices: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; model.k];
    for &i in indices {
        counts[model.assignments[i]] += 1;
    }
    counts
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub count: usize,
}

impl MeanCi {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("mean of an empty set"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            half_width: 1.96 * std / n.sqrt(),
            count: values.len(),
        })
    }

    pub fn low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.mean + self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmosSummary {
    pub sig: MeanCi,
    pub bak: MeanCi,
    pub ovrl: MeanCi,
}

impl DmosSummary {
    pub fn get(&self, channel: Channel) -> MeanCi {
        match channel {
            Channel::Sig => self.sig,
            Channel::Bak => self.bak,
            Channel::Ovrl => self.ovrl,
        }
    }
}

pub fn mean_dmos_of_indices(collection: &ClipCollection, indices: &[usize], models: &[String]) -> Result<DmosSummary> {
    if indices.is_empty() || models.is_empty() {
        return Err(Error::invalid("mean DMOS needs at least one clip and one model"));
    }
    let mut per_channel: [Vec<f64>; 3] = Default::default();
    for &i in indices {
        let record = collection.record(i);
        for m in models {
            let d = record.dmos(m)?;
            per_channel[0].push(d.sig);
            per_channel[1].push(d.bak);
            per_channel[2].push(d.ovrl);
        }
    }
    Ok(DmosSummary {
        sig: MeanCi::from_values(&per_channel[0])?,
        bak: MeanCi::from_values(&per_channel[1])?,
        ovrl: MeanCi::from_values(&per_channel[2])?,
    })
}

/// Mean DMOS over every (clip, model) pair of the sample, per channel,
/// with `mean ± 1.96·s/√count`.
pub fn mean_dmos(sample: &SampleManifest, collection: &ClipCollection, models: &[String]) -> Result<DmosSummary> {
    mean_dmos_of_indices(collection, &sample.indices(), models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, HashSet};

    use crate::dataset::{ClipRecord, MosPair, MosTriple};
    use crate::sampling::{SampleEntry, SamplingConfig, SamplingMode};

    #[test]
    fn chi2_uniform_is_zero() {
        let r = chi_square_uniformity(&[7, 7, 7, 7]).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chi2_hand_case() {
        let r = chi_square_uniformity(&[75, 25]).unwrap();
        assert_eq!(r.chi2, 25.0);
        assert!((r.p_value - special::chi_square_sf(25.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn chi2_errors() {
        assert!(chi_square_uniformity(&[0, 0, 0]).is_err());
        assert!(chi_square_uniformity(&[5]).is_err());
    }

    #[test]
    fn chi2_scale_invariant() {
        let base = [3usize, 9, 1, 0, 4];
        let r = chi_square_uniformity(&base).unwrap();
        for s in [2usize, 7, 1000] {
            let scaled: Vec<usize> = base.iter().map(|c| c * s).collect();
            let rs = chi_square_uniformity(&scaled).unwrap();
            assert!((rs.chi2 - r.chi2).abs() < 1e-9 * r.chi2);
        }
    }

    fn labeled_collection(labels: &[Option<&str>], dmos: &[[f64; 3]]) -> ClipCollection {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let d = dmos[i % dmos.len()];
                let before = MosTriple::new(2.5, 2.5, 2.5);
                let after = MosTriple::new(2.5 + d[0], 2.5 + d[1], 2.5 + d[2]);
                ClipRecord {
                    clip_id: format!("c{i}"),
                    embedding: vec![0.0],
                    noise_label: l.map(str::to_owned),
                    scores: BTreeMap::from([("m".to_owned(), MosPair { before, after })]),
                }
            })
            .collect();
        ClipCollection::new(1, records).unwrap()
    }

    fn manifest_of(c: &ClipCollection, indices: &[usize]) -> SampleManifest {
        SampleManifest {
            entries: indices
                .iter()
                .map(|&i| SampleEntry {
                    clip_id: c.record(i).clip_id.clone(),
                    index: i,
                    cluster: None,
                    weight: 1.0,
                })
                .collect(),
            config: SamplingConfig::new(indices.len(), SamplingMode::Random, 0),
            strategy_name: "fixture".into(),
            k: None,
        }
    }

    #[test]
    fn ood_extremes_and_unlabeled() {
        let c = labeled_collection(&[Some("a"), Some("b"), None], &[[0.0; 3]]);
        let s = manifest_of(&c, &[0, 1, 2]);
        let inside: HashSet<String> = ["a", "b"].map(String::from).into();
        assert_eq!(ood_fraction(&s, &c, &inside).unwrap().fraction, 0.0);
        let none = HashSet::new();
        let r = ood_fraction(&s, &c, &none).unwrap();
        assert_eq!((r.fraction, r.labeled, r.unlabeled), (1.0, 2, 1));
        assert!(ood_fraction(&manifest_of(&c, &[2]), &c, &inside).is_err());
    }

    #[test]
    fn top_categories_single_and_ties() {
        let c = labeled_collection(&[Some("a"), Some("a")], &[[0.0; 3]]);
        let base: HashSet<String> = ["a".to_owned()].into();
        let (ood, ind) = top_categories(&manifest_of(&c, &[0, 1]), &c, &base, 10).unwrap();
        assert!(ood.is_empty());
        assert_eq!(ind, vec![("a".to_owned(), 2)]);

        let labels = [Some("b"), Some("a"), Some("c"), Some("b"), Some("a"), Some("b"), Some("a")];
        let c = labeled_collection(&labels, &[[0.0; 3]]);
        let (ood, _) = top_categories(&manifest_of(&c, &(0..7).collect::<Vec<_>>()), &c, &HashSet::new(), 2).unwrap();
        assert_eq!(ood, vec![("a".to_owned(), 3), ("b".to_owned(), 3)]);
    }

    #[test]
    fn mean_dmos_single_value() {
        let c = labeled_collection(&[None], &[[-0.2, 2.1, 0.5]]);
        let s = mean_dmos(&manifest_of(&c, &[0]), &c, c.model_ids()).unwrap();
        assert!((s.sig.mean + 0.2).abs() < 1e-12 && (s.bak.mean - 2.1).abs() < 1e-12);
        assert!((s.ovrl.mean - 0.5).abs() < 1e-12);
        assert_eq!(s.ovrl.half_width, 0.0);
    }

    #[test]
    fn mean_dmos_four_values() {
        // OVRL values 0.1, 0.3, -0.2, 0.6: mean 0.2, s² = 0.34/3.
        let c = labeled_collection(&[None; 4], &[[0.0, 0.0, 0.1], [0.0, 0.0, 0.3], [0.0, 0.0, -0.2], [0.0, 0.0, 0.6]]);
        let s = mean_dmos(&manifest_of(&c, &[0, 1, 2, 3]), &c, c.model_ids()).unwrap();
        assert!((s.ovrl.mean - 0.2).abs() < 1e-12);
        let half = 1.96 * (0.34f64 / 3.0).sqrt() / 2.0;
        assert!((s.ovrl.half_width - half).abs() < 1e-12);
        assert!(mean_dmos(&manifest_of(&c, &[]), &c, c.model_ids()).is_err());
    }
}
