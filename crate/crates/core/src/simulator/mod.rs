//! Synthetic collections with planted structure.
//!
//! Embeddings come from an isotropic Gaussian mixture. A noisy clip `i` in
//! component `c` scored by model `j` gets
//!
//! ```text
//! dmos = quality[j] · sensitivity_i + difficulty[c] + N(0, noise_std²)
//! ```
//!
//! where `sensitivity_i` (log-normal with mean 1, capped) is how strongly
//! the clip separates good models from bad ones. Clean clips sit in their own mixture
//! component and score DMOS 0 under every model. MOS pairs are realized as
//! `before = 3.0`, `after = 3.0 + dmos`, with `after` clamped into `[1, 5]`.

mod experiment;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ClipCollection, ClipRecord, MosPair, MosTriple, MOS_MAX, MOS_MIN};
use crate::error::{Error, Result};
use crate::rng;

pub use experiment::{
    budget_trend, curation_report, curation_table, run_experiment, CurationRow, ExperimentConfig, ExperimentReport, ExperimentRow,
    Strategy,
};

pub const CLEAN_LABEL: &str = "clean";
const BEFORE_MOS: f64 = 3.0;

/// Parameters of a synthetic workload. Empty `component_means`,
/// `model_quality` and `cluster_difficulty` are generated from the
/// `separation`, `quality_spread` and `difficulty_range` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub n_clips: usize,
    pub dim: usize,
    pub k_true: usize,
    /// `k_true` means, plus optionally one more for the clean component.
    pub component_means: Vec<Vec<f64>>,
    /// Minimum distance between generated means, in units of `component_std`.
    pub separation: f64,
    pub component_std: f64,
    /// Spread of the clean component; clean speech embeds tightly.
    pub clean_std: f64,
    pub n_models: usize,
    pub model_quality: Vec<f64>,
    pub quality_spread: f64,
    pub cluster_difficulty: Vec<f64>,
    pub difficulty_range: [f64; 2],
    /// Log-scale standard deviation of per-clip sensitivity; 0 gives every
    /// noisy clip sensitivity 1.
    pub sensitivity_sigma: f64,
    pub sensitivity_cap: f64,
    pub noise_std: f64,
    pub clean_fraction: f64,
    /// Added to every noisy clip's DMOS on (sig, bak, ovrl).
    pub channel_offsets: [f64; 3],
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl WorkloadSpec {
    /// 20k clips in 32 dimensions, 8 noise components, 28 models, ten clean
    /// clips for every noisy one.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_clips: 20_000,
            dim: 32,
            k_true: 8,
            component_means: Vec::new(),
            separation: 16.0,
            component_std: 1.0,
            clean_std: 0.25,
            n_models: 28,
            model_quality: Vec::new(),
            quality_spread: 0.6,
            cluster_difficulty: Vec::new(),
            difficulty_range: [-0.8, 0.4],
            sensitivity_sigma: 2.0,
            sensitivity_cap: 8.0,
            noise_std: 0.3,
            clean_fraction: 10.0 / 11.0,
            channel_offsets: [0.0; 3],
            seed,
        }
    }

    /// Equal-size noise components and no clean clips.
    pub fn balanced(n_clips: usize, k_true: usize, seed: u64) -> Self {
        Self {
            n_clips,
            k_true,
            clean_fraction: 0.0,
            ..Self::desk(seed)
        }
    }

    pub fn n_clean(&self) -> usize {
        (self.n_clips as f64 * self.clean_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if self.k_true == 0 {
            return fail("k_true must be at least 1".into());
        }
        if self.dim == 0 || self.n_models == 0 {
            return fail("dim and n_models must be positive".into());
        }
        if !(0.0..1.0).contains(&self.clean_fraction) {
            return fail(format!("clean_fraction {} not in [0, 1)", self.clean_fraction));
        }
        if self.n_clips <= self.n_clean() {
            return fail("workload has no noisy clips".into());
        }
        if !positive(self.component_std) || !positive(self.separation) {
            return fail("component_std and separation must be positive".into());
        }
        if !non_negative(self.noise_std) || !non_negative(self.sensitivity_sigma) || !positive(self.sensitivity_cap) {
            return fail("noise_std and sensitivity_sigma must be ≥ 0, sensitivity_cap > 0".into());
        }
        if !positive(self.clean_std) {
            return fail("clean_std must be positive".into());
        }
        let needed = self.k_true + usize::from(self.n_clean() > 0);
        if !self.component_means.is_empty() {
            if self.component_means.len() != self.k_true && self.component_means.len() != needed {
                return fail(format!(
                    "component_means has {} vectors, expected {needed}",
                    self.component_means.len()
                ));
            }
            if self.component_means.len() < needed {
                return fail("clean clips need a mean for the clean component".into());
            }
            if self.component_means.iter().any(|m| m.len() != self.dim) {
                return fail("component mean dimension differs from dim".into());
            }
        }
        if !self.model_quality.is_empty() && self.model_quality.len() != self.n_models {
            return fail("model_quality length differs from n_models".into());
        }
        if !self.cluster_difficulty.is_empty() && self.cluster_difficulty.len() != self.k_true {
            return fail("cluster_difficulty length differs from k_true".into());
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("workload config: {e}")))
    }
}

/// A generated collection with its ground truth.
#[derive(Debug, Clone)]
pub struct Workload {
    pub collection: ClipCollection,
    /// Mixture component per clip; `None` for clean clips.
    pub components: Vec<Option<usize>>,
    pub sensitivity: Vec<f64>,
    pub component_means: Vec<Vec<f64>>,
    pub model_quality: Vec<f64>,
    pub cluster_difficulty: Vec<f64>,
    /// Minimum pairwise mean distance over `component_std`.
    pub separation: f64,
    /// (clip, model) cells whose DMOS was clamped to stay realizable.
    pub clamp_events: usize,
}

impl Workload {
    /// Indices of the models from best to worst planted quality.
    pub fn planted_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.model_quality.len()).collect();
        order.sort_by(|&a, &b| self.model_quality[b].total_cmp(&self.model_quality[a]));
        order
    }

    pub fn write(&self, manifest: impl AsRef<Path>, embeddings: impl AsRef<Path>) -> Result<()> {
        crate::dataset::write_collection(&self.collection, manifest, embeddings)
    }
}

fn generated_means(n: usize, dim: usize, min_dist: f64, r: &mut rng::Rng) -> Vec<Vec<f64>> {
    if n <= dim {
        // Scaled basis vectors: every pair exactly `min_dist` apart.
        let a = min_dist / std::f64::consts::SQRT_2;
        return (0..n)
            .map(|c| (0..dim).map(|d| if d == c { a } else { 0.0 }).collect())
            .collect();
    }
    let mut means: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut closest = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            closest = closest.min(crate::clustering::sq_dist(&means[i], &means[j]).sqrt());
        }
    }
    let scale = min_dist / closest;
    for m in &mut means {
        for x in m.iter_mut() {
            *x *= scale;
        }
    }
    means
}

fn min_pairwise(means: &[Vec<f64>]) -> f64 {
    let mut closest = f64::INFINITY;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            closest = closest.min(crate::clustering::sq_dist(&means[i], &means[j]).sqrt());
        }
    }
    closest
}

/// False for NaN as well as for non-positive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn non_negative(x: f64) -> bool {
    x >= 0.0
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Draws a collection from `spec`. Identical specs give identical output.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let mut r = rng::seeded(spec.seed);
    let n_clean = spec.n_clean();
    let n_components = spec.k_true + usize::from(n_clean > 0);

    let component_means = if spec.component_means.is_empty() {
        generated_means(n_components, spec.dim, spec.separation * spec.component_std, &mut r)
    } else {
        spec.component_means.clone()
    };
    let model_quality = if spec.model_quality.is_empty() {
        let half = spec.quality_spread / 2.0;
        let mut q = linspace(-half, half, spec.n_models);
        q.shuffle(&mut r);
        q
    } else {
        spec.model_quality.clone()
    };
    let cluster_difficulty = if spec.cluster_difficulty.is_empty() {
        let mut d = linspace(spec.difficulty_range[0], spec.difficulty_range[1], spec.k_true);
        d.shuffle(&mut r);
        d
    } else {
        spec.cluster_difficulty.clone()
    };

    let mut components: Vec<Option<usize>> = (0..spec.n_clips - n_clean)
        .map(|i| Some(i % spec.k_true))
        .chain(std::iter::repeat_n(None, n_clean))
        .collect();
    components.shuffle(&mut r);

    let width = spec.n_models.to_string().len().max(2);
    let model_ids: Vec<String> = (1..=spec.n_models).map(|j| format!("model-{j:0width$}")).collect();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let before = MosTriple::new(BEFORE_MOS, BEFORE_MOS, BEFORE_MOS);

    let mut records = Vec::with_capacity(spec.n_clips);
    let mut sensitivity = Vec::with_capacity(spec.n_clips);
    let mut clamp_events = 0;
    for (i, &component) in components.iter().enumerate() {
        let mean = &component_means[component.unwrap_or(spec.k_true)];
        let std = if component.is_some() { spec.component_std } else { spec.clean_std };
        let embedding: Vec<f32> = mean
            .iter()
            .map(|m| (m + std * r.sample::<f64, _>(StandardNormal)) as f32)
            .collect();
        let s = match component {
            Some(_) => {
                let tau = spec.sensitivity_sigma;
                let z: f64 = r.sample(StandardNormal);
                (tau * z - tau * tau / 2.0).exp().min(spec.sensitivity_cap)
            }
            None => 0.0,
        };
        sensitivity.push(s);

        let mut scores = BTreeMap::new();
        for (j, id) in model_ids.iter().enumerate() {
            let after = match component {
                Some(c) => {
                    let base = model_quality[j] * s + cluster_difficulty[c] + noise.sample(&mut r);
                    let mut channel = [0.0; 3];
                    for (v, off) in channel.iter_mut().zip(spec.channel_offsets) {
                        let raw = BEFORE_MOS + base + off;
                        *v = raw.clamp(MOS_MIN, MOS_MAX);
                        if *v != raw {
                            clamp_events += 1;
                        }
                    }
                    MosTriple::from(channel)
                }
                None => before,
            };
            scores.insert(id.clone(), MosPair { before, after });
        }
        records.push(ClipRecord {
            clip_id: format!("clip-{:06}", i + 1),
            embedding,
            noise_label: Some(match component {
                Some(c) => format!("component-{c}"),
                None => CLEAN_LABEL.to_owned(),
            }),
            scores,
        });
    }

    let collection = ClipCollection::with_models(spec.dim, records, model_ids)?;
    Ok(Workload {
        collection,
        components,
        sensitivity,
        separation: min_pairwise(&component_means) / spec.component_std,
        component_means,
        model_quality,
        cluster_difficulty,
        clamp_events,
    })
}
