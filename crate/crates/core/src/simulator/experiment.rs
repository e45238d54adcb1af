//! Strategy comparison over budgets.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::dataset::{Channel, ClipCollection};
use crate::error::{Error, Result};
use crate::metrics::{
    self, bootstrap_rounds, chi_square_uniformity, cluster_counts, mean_dmos_of_indices, ood_of_indices, table,
    DiversityReport, DmosSummary, OodReport, RankingFidelity,
};
use crate::rng;
use crate::sampling::{SamplingConfig, SamplingMode, SamplingPlan, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Diversity,
    Variance,
    Aura,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Random, Strategy::Diversity, Strategy::Variance, Strategy::Aura];

    pub fn mode(self) -> SamplingMode {
        match self {
            Strategy::Random => SamplingMode::Random,
            Strategy::Diversity => SamplingMode::Diversity,
            Strategy::Variance => SamplingMode::Variance,
            Strategy::Aura => SamplingMode::Ranking,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Diversity => "diversity",
            Strategy::Variance => "variance",
            Strategy::Aura => "aura",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "diversity" => Ok(Strategy::Diversity),
            "variance" => Ok(Strategy::Variance),
            "aura" | "ranking" => Ok(Strategy::Aura),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<usize>,
    pub rounds: usize,
    /// Channels whose ranking fidelity is measured.
    pub channels: Vec<Channel>,
    /// Channel that drives the variance weights for the pooled diversity,
    /// OOD and DMOS columns.
    pub primary_channel: Channel,
    pub epsilon: f64,
    pub seed: u64,
    pub baseline_labels: Option<HashSet<String>>,
}

impl ExperimentConfig {
    pub fn new(budgets: Vec<usize>, seed: u64) -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            budgets,
            rounds: metrics::DEFAULT_ROUNDS,
            channels: Channel::ALL.to_vec(),
            primary_channel: Channel::Ovrl,
            epsilon: DEFAULT_EPSILON,
            seed,
            baseline_labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub strategy: Strategy,
    pub budget: usize,
    pub budget_fraction: f64,
    pub srcc: BTreeMap<Channel, RankingFidelity>,
    /// χ² of cluster counts pooled over every bootstrap round.
    pub diversity: DiversityReport,
    pub ood: Option<OodReport>,
    pub dmos: DmosSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n_clips: usize,
    pub k: usize,
    pub rounds: usize,
    pub primary_channel: Channel,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentReport {
    pub fn row(&self, strategy: Strategy, budget: usize) -> Option<&ExperimentRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.budget == budget)
    }

    /// Mean SRCC on `channel`, if measured.
    pub fn srcc_mean(&self, strategy: Strategy, budget: usize, channel: Channel) -> Option<f64> {
        self.row(strategy, budget)?.srcc.get(&channel).map(|f| f.srcc_mean)
    }

    fn budgets(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.rows.iter().map(|r| r.budget).collect();
        b.sort_unstable();
        b.dedup();
        b
    }

    fn strategies(&self) -> Vec<Strategy> {
        let mut s: Vec<Strategy> = self.rows.iter().map(|r| r.strategy).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// One comparison table per budget: SRCC mean ± std per channel, then χ².
    pub fn comparison_table(&self) -> String {
        let mut out = String::new();
        for budget in self.budgets() {
            let rows: Vec<&ExperimentRow> = self.rows.iter().filter(|r| r.budget == budget).collect();
            let channels: Vec<Channel> = rows[0].srcc.keys().copied().collect();
            let mut headers = vec!["strategy".to_owned()];
            headers.extend(channels.iter().map(|c| format!("SRCC {}", c.name().to_uppercase())));
            headers.extend(["chi2".to_owned(), "p".to_owned(), "OOD %".to_owned()]);
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut cells = vec![r.strategy.name().to_owned()];
                    cells.extend(
                        r.srcc
                            .values()
                            .map(|f| format!("{:.3} ± {:.3}", f.srcc_mean, f.srcc_std)),
                    );
                    cells.push(format!("{:.1}", r.diversity.chi2));
                    cells.push(table::format_p(r.diversity.p_value));
                    cells.push(r.ood.as_ref().map_or("-".into(), |o| format!("{:.0}%", 100.0 * o.fraction)));
                    cells
                })
                .collect();
            let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
            out.push_str(&format!(
                "budget {budget} ({:.2}% of {} clips, k = {}, {} rounds)\n",
                100.0 * rows[0].budget_fraction,
                self.n_clips,
                self.k,
                self.rounds
            ));
            out.push_str(&table::render(&header_refs, &body));
            out.push('\n');
        }
        out
    }

    /// Mean SRCC on the primary channel per budget and strategy.
    pub fn sweep_table(&self) -> String {
        let strategies = self.strategies();
        let mut headers = vec!["budget".to_owned(), "fraction".to_owned()];
        headers.extend(strategies.iter().map(|s| s.name().to_owned()));
        let body: Vec<Vec<String>> = self
            .budgets()
            .into_iter()
            .map(|b| {
                let mut cells = vec![b.to_string(), format!("{:.2}%", 100.0 * b as f64 / self.n_clips as f64)];
                cells.extend(strategies.iter().map(|&s| {
                    self.srcc_mean(s, b, self.primary_channel)
                        .map_or("-".into(), |v| format!("{v:.3}"))
                }));
                cells
            })
            .collect();
        let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
        format!(
            "mean SRCC ({}) by budget\n{}",
            self.primary_channel.name().to_uppercase(),
            table::render(&header_refs, &body)
        )
    }
}

/// Spearman correlation between budget and mean SRCC for one strategy
/// (0 when either side is constant).
pub fn budget_trend(report: &ExperimentReport, strategy: Strategy, channel: Channel) -> f64 {
    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.strategy == strategy)
        .filter_map(|r| r.srcc.get(&channel).map(|f| (r.budget as f64, f.srcc_mean)))
        .collect();
    let budgets: Vec<f64> = points.iter().map(|p| p.0).collect();
    let means: Vec<f64> = points.iter().map(|p| p.1).collect();
    metrics::srcc(&budgets, &means).unwrap_or(0.0)
}

fn strategy_seed(seed: u64, strategy: Strategy, budget: usize, channel: Channel) -> u64 {
    rng::mix(rng::mix(rng::mix(seed, strategy as u64), budget as u64), channel as u64)
}

/// Bootstraps every (strategy, budget) pair and collects ranking fidelity,
/// pooled cluster coverage, OOD share and mean DMOS.
pub fn run_experiment(
    collection: &ClipCollection,
    model: &ClusterModel,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if config.strategies.is_empty() || config.budgets.is_empty() {
        return Err(Error::invalid("experiment needs at least one strategy and one budget"));
    }
    if model.assignments.len() != collection.len() {
        return Err(Error::invalid("cluster model does not cover the collection"));
    }
    let mut channels = config.channels.clone();
    if !channels.contains(&config.primary_channel) {
        channels.push(config.primary_channel);
    }
    channels.sort_unstable();
    channels.dedup();
    let matrices: BTreeMap<Channel, _> = channels
        .iter()
        .map(|&c| Ok((c, collection.dmos_matrix(c)?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &budget in &config.budgets {
        for &strategy in &config.strategies {
            let mut srcc = BTreeMap::new();
            let mut pooled: Vec<usize> = Vec::new();
            for &channel in &channels {
                let sampling = SamplingConfig {
                    budget,
                    mode: strategy.mode(),
                    channel,
                    seed: strategy_seed(config.seed, strategy, budget, channel),
                    epsilon: config.epsilon,
                };
                let matrix = &matrices[&channel];
                let plan = SamplingPlan::with_matrix(collection, Some(model), &sampling, matrix)?;
                let rounds = bootstrap_rounds(&plan, matrix, config.rounds)?;
                if config.channels.contains(&channel) {
                    srcc.insert(channel, metrics::fidelity(&rounds)?);
                }
                if channel == config.primary_channel {
                    pooled = rounds.into_iter().flat_map(|r| r.indices).collect();
                }
            }
            let diversity = chi_square_uniformity(&cluster_counts(model, &pooled))?;
            let ood = match &config.baseline_labels {
                Some(labels) => Some(ood_of_indices(collection, &pooled, labels)?),
                None => None,
            };
            let dmos = mean_dmos_of_indices(collection, &pooled, collection.model_ids())?;
            rows.push(ExperimentRow {
                strategy,
                budget,
                budget_fraction: budget as f64 / collection.len() as f64,
                srcc,
                diversity,
                ood,
                dmos,
            });
        }
    }
    Ok(ExperimentReport {
        n_clips: collection.len(),
        k: model.k,
        rounds: config.rounds,
        primary_channel: config.primary_channel,
        rows,
    })
}

/// One test set's difficulty and coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationRow {
    pub name: String,
    pub size: usize,
    pub dmos: DmosSummary,
    pub diversity: DiversityReport,
    pub ood: Option<OodReport>,
}

impl CurationRow {
    pub fn evaluate(
        name: &str,
        collection: &ClipCollection,
        model: &ClusterModel,
        indices: &[usize],
        baseline_labels: Option<&HashSet<String>>,
    ) -> Result<Self> {
        Ok(Self {
            name: name.to_owned(),
            size: indices.len(),
            dmos: mean_dmos_of_indices(collection, indices, collection.model_ids())?,
            diversity: chi_square_uniformity(&cluster_counts(model, indices))?,
            ood: baseline_labels
                .map(|l| ood_of_indices(collection, indices, l))
                .transpose()?,
        })
    }
}

/// Compares hardness sampling with and without clustering (plus any extra
/// named test sets) by mean DMOS, χ² coverage and OOD share.
pub fn curation_report(
    collection: &ClipCollection,
    model: &ClusterModel,
    budget: usize,
    seed: u64,
    epsilon: f64,
    baseline_labels: Option<&HashSet<String>>,
    extra: &[(&str, Vec<usize>)],
) -> Result<Vec<CurationRow>> {
    let mut rows = Vec::new();
    for (name, indices) in extra {
        rows.push(CurationRow::evaluate(name, collection, model, indices, baseline_labels)?);
    }
    let config = SamplingConfig::new(budget, SamplingMode::Hardness, seed).with_epsilon(epsilon);
    let global = crate::sampling::sample(collection, None, &config)?;
    rows.push(CurationRow::evaluate(
        "hardness (no cluster)",
        collection,
        model,
        &global.indices(),
        baseline_labels,
    )?);
    let clustered = crate::sampling::sample(collection, Some(model), &config)?;
    rows.push(CurationRow::evaluate(
        "hardness + clustering",
        collection,
        model,
        &clustered.indices(),
        baseline_labels,
    )?);
    Ok(rows)
}

/// Table with DMOS per channel (± 95% half-width), χ², p and OOD share.
pub fn curation_table(rows: &[CurationRow]) -> String {
    let headers = ["test set", "n", "DMOS SIG", "DMOS BAK", "DMOS OVRL", "chi2", "p", "OOD %"];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let cell = |c: Channel| {
                let m = r.dmos.get(c);
                format!("{:.2} ± {:.2}", m.mean, m.half_width)
            };
            vec![
                r.name.clone(),
                r.size.to_string(),
                cell(Channel::Sig),
                cell(Channel::Bak),
                cell(Channel::Ovrl),
                format!("{:.0}", r.diversity.chi2),
                table::format_p(r.diversity.p_value),
                r.ood.as_ref().map_or("-".into(), |o| format!("{:.0}%", 100.0 * o.fraction)),
            ]
        })
        .collect();
    table::render(&headers, &body)
}
