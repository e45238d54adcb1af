use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank::{model_means, srcc};
use crate::clustering::ClusterModel;
use crate::dataset::{ClipCollection, DmosMatrix};
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::{SamplingConfig, SamplingPlan};

pub const DEFAULT_ROUNDS: usize = 200;

/// Spread of sample-vs-full ranking agreement over repeated draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingFidelity {
    pub srcc_mean: f64,
    pub srcc_std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub bootstrap_rounds: usize,
    /// Rounds whose sample ranked every model equal; they score 0.
    pub degenerate_rounds: usize,
}

impl RankingFidelity {
    pub fn from_values(values: &[f64], degenerate_rounds: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("need at least 2 bootstrap rounds"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        // A percentile interval can exclude the mean on very skewed draws;
        // widen it to keep the mean inside.
        let low = percentile(&sorted, 2.5).min(mean);
        let high = percentile(&sorted, 97.5).max(mean);
        Ok(Self {
            srcc_mean: mean,
            srcc_std: var.sqrt(),
            ci95_low: low,
            ci95_high: high,
            bootstrap_rounds: values.len(),
            degenerate_rounds,
        })
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Seed of bootstrap round `round` under base seed `seed`.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    rng::mix(seed, round as u64)
}

/// One bootstrap round: the sampled clip indices and their SRCC against the
/// full-data ranking (`None` when the sample ties every model).
#[derive(Debug, Clone)]
pub struct Round {
    pub indices: Vec<usize>,
    pub srcc: Option<f64>,
}

/// Runs `rounds` draws of `plan` with round-derived seeds, in parallel.
pub fn bootstrap_rounds(plan: &SamplingPlan<'_>, matrix: &DmosMatrix, rounds: usize) -> Result<Vec<Round>> {
    if rounds < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 rounds"));
    }
    let all: Vec<usize> = (0..matrix.n_clips()).collect();
    let full = model_means(matrix, &all)?;
    if full.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::invalid(
            "full-data ranking ties every model; rank correlation is undefined",
        ));
    }
    let seed = plan.config().seed;
    (0..rounds)
        .into_par_iter()
        .map(|r| {
            let sample = plan.draw(round_seed(seed, r))?;
            let indices = sample.indices();
            let means = model_means(matrix, &indices)?;
            let srcc = match srcc(&means, &full) {
                Ok(v) => Some(v),
                Err(Error::ConstantInput) => None,
                Err(e) => return Err(e),
            };
            Ok(Round { indices, srcc })
        })
        .collect()
}

pub fn fidelity(rounds: &[Round]) -> Result<RankingFidelity> {
    let values: Vec<f64> = rounds.iter().map(|r| r.srcc.unwrap_or(0.0)).collect();
    let degenerate = rounds.iter().filter(|r| r.srcc.is_none()).count();
    RankingFidelity::from_values(&values, degenerate)
}

/// Repeats the configured sampling `rounds` times and summarizes the SRCC
/// between each sample's model ranking and the full-data ranking.
pub fn bootstrap_srcc(
    collection: &ClipCollection,
    model: Option<&ClusterModel>,
    config: &SamplingConfig,
    rounds: usize,
) -> Result<RankingFidelity> {
    let matrix = collection.dmos_matrix(config.channel)?;
    let plan = SamplingPlan::with_matrix(collection, model, config, &matrix)?;
    fidelity(&bootstrap_rounds(&plan, &matrix, rounds)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_stats() {
        let f = RankingFidelity::from_values(&[0.5, 0.7, 0.9, 1.0], 0).unwrap();
        assert!((f.srcc_mean - 0.775).abs() < 1e-12);
        let var = (0.275f64.powi(2) + 0.075f64.powi(2) + 0.125f64.powi(2) + 0.225f64.powi(2)) / 3.0;
        assert!((f.srcc_std - var.sqrt()).abs() < 1e-12);
        // Positions 0.075 and 2.925 of the sorted values.
        assert!((f.ci95_low - 0.515).abs() < 1e-12);
        assert!((f.ci95_high - 0.9925).abs() < 1e-12);
    }

    #[test]
    fn fidelity_keeps_mean_inside_interval() {
        let mut v = vec![1.0; 99];
        v.push(-1.0);
        let f = RankingFidelity::from_values(&v, 0).unwrap();
        assert!(f.ci95_low <= f.srcc_mean && f.srcc_mean <= f.ci95_high);
        assert!(RankingFidelity::from_values(&[1.0], 0).is_err());
    }
}
