//! Budget-limited subset selection.
//!
//! The stratified modes split the budget into per-cluster quotas and draw
//! within each cluster by weighted sampling without replacement:
//!
//! * `hardness`: weight `max − dmos + ε` over the cluster's mean DMOS, so the
//!   clips models help least are favoured;
//! * `ranking`: weight = across-model DMOS variance + ε;
//! * `diversity`: uniform weight.
//!
//! `random` and `variance` are unclustered baselines; `hardness` without a
//! cluster model is the global (unstratified) variant.

mod manifest;
mod pps;
mod weights;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::dataset::{Channel, ClipCollection, DmosMatrix};
use crate::error::{Error, Result};
use crate::rng;

pub use manifest::{read_manifest, write_manifest, ManifestHeader};
pub use pps::{weighted_sample_indices, weighted_sample_without_replacement};
pub use weights::{hardness_raw, hardness_weights, population_variance, variance_raw, variance_weights};

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Hardness,
    Ranking,
    Random,
    Diversity,
    Variance,
}

impl SamplingMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::Hardness => "hardness",
            SamplingMode::Ranking => "ranking",
            SamplingMode::Random => "random",
            SamplingMode::Diversity => "diversity",
            SamplingMode::Variance => "variance",
        }
    }

    pub fn is_stratified(self) -> bool {
        matches!(self, SamplingMode::Ranking | SamplingMode::Diversity)
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hardness" => Ok(SamplingMode::Hardness),
            "ranking" | "aura" => Ok(SamplingMode::Ranking),
            "random" => Ok(SamplingMode::Random),
            "diversity" => Ok(SamplingMode::Diversity),
            "variance" => Ok(SamplingMode::Variance),
            other => Err(Error::invalid(format!("unknown sampling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub budget: usize,
    pub mode: SamplingMode,
    pub channel: Channel,
    pub seed: u64,
    pub epsilon: f64,
}

impl SamplingConfig {
    pub fn new(budget: usize, mode: SamplingMode, seed: u64) -> Self {
        Self {
            budget,
            mode,
            channel: Channel::Ovrl,
            seed,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self, population: usize) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget must be positive"));
        }
        if self.budget > population {
            return Err(Error::invalid(format!(
                "budget {} exceeds collection size {population}",
                self.budget
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub clip_id: String,
    /// Position of the clip in its collection.
    #[serde(skip)]
    pub index: usize,
    pub cluster: Option<usize>,
    /// Weight before normalization.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleManifest {
    pub entries: Vec<SampleEntry>,
    pub config: SamplingConfig,
    pub strategy_name: String,
    /// Cluster count of the model used, if any.
    pub k: Option<usize>,
}

impl SampleManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }
}

/// Splits `budget` across clusters of the given sizes.
///
/// Every cluster starts at `budget / k`; the remainder goes one apiece to
/// the largest clusters (lower index first on equal sizes). Clusters smaller
/// than their quota give everything they have and the shortfall is spread
/// over clusters with room left, proportionally to their sizes (largest
/// remainder rounding), repeating until it is absorbed.
pub fn allocate_quotas(sizes: &[usize], budget: usize) -> Result<Vec<usize>> {
    let k = sizes.len();
    if k == 0 {
        return Err(Error::invalid("no clusters to allocate over"));
    }
    let total: usize = sizes.iter().sum();
    if budget > total {
        return Err(Error::invalid(format!(
            "budget {budget} exceeds collection size {total}"
        )));
    }
    let mut quota = vec![budget / k; k];
    let mut by_size: Vec<usize> = (0..k).collect();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    for &c in by_size.iter().take(budget % k) {
        quota[c] += 1;
    }

    let mut alloc: Vec<usize> = quota.iter().zip(sizes).map(|(&q, &s)| q.min(s)).collect();
    let mut deficit = budget - alloc.iter().sum::<usize>();
    while deficit > 0 {
        let open: Vec<usize> = (0..k).filter(|&c| alloc[c] < sizes[c]).collect();
        let open_total: usize = open.iter().map(|&c| sizes[c]).sum();
        let mut shares: Vec<(usize, usize, usize)> = open
            .iter()
            .map(|&c| {
                let exact = deficit * sizes[c];
                (c, exact / open_total, exact % open_total)
            })
            .collect();
        let mut leftover = deficit - shares.iter().map(|s| s.1).sum::<usize>();
        let mut by_remainder: Vec<usize> = (0..shares.len()).collect();
        by_remainder.sort_by(|&a, &b| shares[b].2.cmp(&shares[a].2).then(shares[a].0.cmp(&shares[b].0)));
        for i in by_remainder {
            if leftover == 0 {
                break;
            }
            shares[i].1 += 1;
            leftover -= 1;
        }
        for (c, share, _) in shares {
            let add = share.min(sizes[c] - alloc[c]);
            alloc[c] += add;
            deficit -= add;
        }
    }
    Ok(alloc)
}

#[derive(Debug, Clone)]
struct Stratum {
    cluster: Option<usize>,
    members: Vec<usize>,
    weights: Vec<f64>,
    quota: usize,
}

/// Weights and quotas computed once, ready for repeated seeded draws.
#[derive(Debug, Clone)]
pub struct SamplingPlan<'a> {
    collection: &'a ClipCollection,
    assignments: Option<&'a [usize]>,
    k: Option<usize>,
    config: SamplingConfig,
    strategy_name: String,
    strata: Vec<Stratum>,
}

impl<'a> SamplingPlan<'a> {
    pub fn new(
        collection: &'a ClipCollection,
        model: Option<&'a ClusterModel>,
        config: &SamplingConfig,
    ) -> Result<Self> {
        let matrix = collection.dmos_matrix(config.channel)?;
        Self::with_matrix(collection, model, config, &matrix)
    }

    /// Like [`SamplingPlan::new`] with a precomputed DMOS matrix for
    /// `config.channel`.
    pub fn with_matrix(
        collection: &'a ClipCollection,
        model: Option<&'a ClusterModel>,
        config: &SamplingConfig,
        matrix: &DmosMatrix,
    ) -> Result<Self> {
        let n = collection.len();
        config.validate(n)?;
        if matrix.channel != config.channel || matrix.n_clips() != n {
            return Err(Error::invalid("DMOS matrix does not match the collection and channel"));
        }
        if let Some(m) = model {
            if m.assignments.len() != n {
                return Err(Error::invalid(format!(
                    "cluster model covers {} clips, collection has {n}",
                    m.assignments.len()
                )));
            }
        }
        let stratified = config.mode.is_stratified() || (config.mode == SamplingMode::Hardness && model.is_some());
        let needs_variance = matches!(config.mode, SamplingMode::Ranking | SamplingMode::Variance);
        if needs_variance && matrix.n_models() < 2 {
            return Err(Error::invalid(format!(
                "{} mode needs at least 2 models, collection has {}",
                config.mode,
                matrix.n_models()
            )));
        }

        let strata = if stratified {
            let model = model.ok_or_else(|| {
                Error::invalid(format!("{} mode needs a cluster model", config.mode))
            })?;
            let members = model.members();
            let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
            let quotas = allocate_quotas(&sizes, config.budget)?;
            members
                .into_iter()
                .zip(quotas)
                .enumerate()
                .map(|(c, (members, quota))| {
                    let weights = stratum_weights(config, matrix, &members)?;
                    Ok(Stratum {
                        cluster: Some(c),
                        members,
                        weights,
                        quota,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let members: Vec<usize> = (0..n).collect();
            let weights = stratum_weights(config, matrix, &members)?;
            vec![Stratum {
                cluster: None,
                members,
                weights,
                quota: config.budget,
            }]
        };

        let strategy_name = match (config.mode, stratified) {
            (SamplingMode::Hardness, false) => "hardness-global".to_owned(),
            (SamplingMode::Ranking, _) => "aura".to_owned(),
            (mode, _) => mode.name().to_owned(),
        };
        Ok(Self {
            collection,
            assignments: model.map(|m| m.assignments.as_slice()),
            k: model.map(|m| m.k),
            config: *config,
            strategy_name,
            strata,
        })
    }

    pub fn config(&self) -> &SamplingConfig {
        &self.config
    }

    pub fn strategy_name(&self) -> &str {
        &self.strategy_name
    }

    /// Per-stratum quotas (one entry for unstratified modes).
    pub fn quotas(&self) -> Vec<usize> {
        self.strata.iter().map(|s| s.quota).collect()
    }

    /// Draws a sample. Stratum `c` uses seed `seed ^ c`, so strata are
    /// independent and can be drawn in any order.
    pub fn draw(&self, seed: u64) -> Result<SampleManifest> {
        let picks: Vec<Vec<(usize, f64)>> = self
            .strata
            .par_iter()
            .map(|s| {
                let stream_seed = seed ^ s.cluster.unwrap_or(0) as u64;
                let mut r = rng::seeded(stream_seed);
                let chosen = weighted_sample_indices(&s.weights, s.quota, &mut r)?;
                Ok(chosen.into_iter().map(|i| (s.members[i], s.weights[i])).collect())
            })
            .collect::<Result<_>>()?;

        let entries = picks
            .into_iter()
            .flatten()
            .map(|(index, weight)| SampleEntry {
                clip_id: self.collection.record(index).clip_id.clone(),
                index,
                cluster: self.assignments.map(|a| a[index]),
                weight,
            })
            .collect();
        let mut config = self.config;
        config.seed = seed;
        Ok(SampleManifest {
            entries,
            config,
            strategy_name: self.strategy_name.clone(),
            k: self.k,
        })
    }
}

fn stratum_weights(config: &SamplingConfig, matrix: &DmosMatrix, members: &[usize]) -> Result<Vec<f64>> {
    match config.mode {
        SamplingMode::Random | SamplingMode::Diversity => Ok(vec![1.0; members.len()]),
        SamplingMode::Hardness => {
            let means: Vec<f64> = members
                .iter()
                .map(|&i| {
                    let row = matrix.row(i);
                    row.iter().sum::<f64>() / row.len() as f64
                })
                .collect();
            if matrix.n_models() == 0 {
                return Err(Error::invalid("hardness mode needs at least one model"));
            }
            hardness_raw(&means, config.epsilon)
        }
        SamplingMode::Ranking | SamplingMode::Variance => {
            let rows: Vec<&[f64]> = members.iter().map(|&i| matrix.row(i)).collect();
            variance_raw(&rows, config.epsilon)
        }
    }
}

/// Draws one sample under `config` (the mode decides whether `model` is
/// used for stratification).
pub fn sample(collection: &ClipCollection, model: Option<&ClusterModel>, config: &SamplingConfig) -> Result<SampleManifest> {
    SamplingPlan::new(collection, model, config)?.draw(config.seed)
}

/// Per-cluster sampling in hardness, ranking or diversity mode.
pub fn stratified_sample(
    collection: &ClipCollection,
    model: &ClusterModel,
    config: &SamplingConfig,
) -> Result<SampleManifest> {
    match config.mode {
        SamplingMode::Hardness | SamplingMode::Ranking | SamplingMode::Diversity => {
            sample(collection, Some(model), config)
        }
        other => Err(Error::invalid(format!("{other} is not a stratified mode"))),
    }
}

/// Uniform sample without replacement.
pub fn baseline_random(collection: &ClipCollection, budget: usize, seed: u64) -> Result<SampleManifest> {
    sample(collection, None, &SamplingConfig::new(budget, SamplingMode::Random, seed))
}

/// Global sampling proportional to across-model DMOS variance.
pub fn baseline_variance(
    collection: &ClipCollection,
    budget: usize,
    channel: Channel,
    seed: u64,
) -> Result<SampleManifest> {
    let config = SamplingConfig::new(budget, SamplingMode::Variance, seed).with_channel(channel);
    sample(collection, None, &config)
}
