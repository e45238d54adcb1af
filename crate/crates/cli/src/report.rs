//! Report assembly and rendering.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use aura_core::clustering::{ClusterModel, ClusterSummary};
use aura_core::dataset::{Channel, ClipCollection};
use aura_core::metrics::{self, table, CategoryCounts, ModelRanking};
use aura_core::sampling::{SampleManifest, SamplingMode};
use aura_core::simulator::{curation_table, CurationRow, ExperimentReport};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub clips: usize,
    pub dim: usize,
    pub models: usize,
    pub labeled: usize,
    pub categories: usize,
}

impl DatasetSummary {
    pub fn of(collection: &ClipCollection) -> Self {
        let categories: BTreeSet<&str> = collection
            .records()
            .iter()
            .filter_map(|r| r.noise_label.as_deref())
            .collect();
        Self {
            clips: collection.len(),
            dim: collection.dim(),
            models: collection.model_ids().len(),
            labeled: collection.labeled_count(),
            categories: categories.len(),
        }
    }

    pub fn headline(&self) -> String {
        format!("{} clips, dim {}, {} models", self.clips, self.dim, self.models)
    }

    pub fn labels_line(&self) -> String {
        format!(
            "{}/{} clips labeled, {} noise categories",
            self.labeled, self.clips, self.categories
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TopCategories {
    pub ood: CategoryCounts,
    pub in_distribution: CategoryCounts,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingComparison {
    pub full: ModelRanking,
    pub sample: ModelRanking,
    /// None when either ranking is a complete tie.
    pub srcc: Option<f64>,
}

impl RankingComparison {
    pub fn new(collection: &ClipCollection, sample: &SampleManifest, channel: Channel) -> aura_core::Result<Self> {
        let full = metrics::rank_models(collection, channel)?;
        let on_sample = metrics::rank_sample(collection, sample, channel)?;
        let srcc = metrics::srcc(&full.means, &on_sample.means).ok();
        Ok(Self {
            full,
            sample: on_sample,
            srcc,
        })
    }
}

/// Evaluation of one drawn sample.
#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub strategy: String,
    pub mode: SamplingMode,
    pub channel: Channel,
    pub budget: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub evaluation: CurationRow,
    pub top_categories: Option<TopCategories>,
    pub ranking: RankingComparison,
}

impl SampleReport {
    pub fn new(
        collection: &ClipCollection,
        model: &ClusterModel,
        sample: &SampleManifest,
        baseline: Option<&HashSet<String>>,
        top_n: usize,
    ) -> aura_core::Result<Self> {
        let indices = sample.indices();
        let evaluation = CurationRow::evaluate(&sample.strategy_name, collection, model, &indices, baseline)?;
        let top_categories = baseline
            .map(|b| metrics::top_categories(sample, collection, b, top_n))
            .transpose()?
            .map(|(ood, in_distribution)| TopCategories { ood, in_distribution });
        Ok(Self {
            strategy: sample.strategy_name.clone(),
            mode: sample.config.mode,
            channel: sample.config.channel,
            budget: sample.config.budget,
            seed: sample.config.seed,
            epsilon: sample.config.epsilon,
            evaluation,
            top_categories,
            ranking: RankingComparison::new(collection, sample, sample.config.channel)?,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "sample: {} ({} clips, mode {}, channel {}, seed {}, epsilon {})",
            self.strategy,
            self.evaluation.size,
            self.mode,
            self.channel.name().to_uppercase(),
            self.seed,
            self.epsilon
        );
        out.push_str(&curation_table(std::slice::from_ref(&self.evaluation)));
        if let Some(top) = &self.top_categories {
            out.push('\n');
            out.push_str(&categories_table(top));
        }
        out.push('\n');
        out.push_str(&ranking_table(&self.ranking));
        out
    }
}

fn categories_table(top: &TopCategories) -> String {
    let body: Vec<Vec<String>> = top
        .ood
        .iter()
        .map(|(l, c)| vec![l.clone(), "ood".into(), c.to_string()])
        .chain(
            top.in_distribution
                .iter()
                .map(|(l, c)| vec![l.clone(), "in".into(), c.to_string()]),
        )
        .collect();
    format!("top noise categories\n{}", table::render(&["category", "set", "clips"], &body))
}

pub fn ranking_table(r: &RankingComparison) -> String {
    let sample_rank = |id: &str| {
        let i = r.sample.model_ids.iter().position(|m| m == id).expect("same model set");
        (r.sample.means[i], r.sample.ranks[i])
    };
    let body: Vec<Vec<String>> = r
        .full
        .ordered()
        .into_iter()
        .map(|(id, mean, rank)| {
            let (s_mean, s_rank) = sample_rank(id);
            vec![
                id.to_owned(),
                format!("{rank:.1}"),
                format!("{mean:.3}"),
                format!("{s_rank:.1}"),
                format!("{s_mean:.3}"),
            ]
        })
        .collect();
    let srcc = r.srcc.map_or("undefined (tied ranking)".into(), |v| format!("{v:.4}"));
    format!(
        "model ranking on {} (SRCC sample vs full: {srcc})\n{}",
        r.full.channel.name().to_uppercase(),
        table::render(&["model", "rank", "mean DMOS", "sample rank", "sample DMOS"], &body)
    )
}

pub fn ranking_only(ranking: &ModelRanking) -> String {
    let body: Vec<Vec<String>> = ranking
        .ordered()
        .into_iter()
        .map(|(id, mean, rank)| vec![id.to_owned(), format!("{rank:.1}"), format!("{mean:.3}")])
        .collect();
    format!(
        "model ranking on {} over {} clips\n{}",
        ranking.channel.name().to_uppercase(),
        ranking.n_clips,
        table::render(&["model", "rank", "mean DMOS"], &body)
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub dataset: DatasetSummary,
    pub k_grid: Vec<usize>,
    pub clustering: ClusterSummary,
    pub sample: SampleReport,
    /// Hardness sampling with and without clustering.
    pub curation: Vec<CurationRow>,
    pub comparison: ExperimentReport,
}

impl PipelineReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset: {}; {}", self.dataset.headline(), self.dataset.labels_line());
        let c = &self.clustering;
        let _ = writeln!(
            out,
            "clustering: k = {} from {:?}, Davies-Bouldin {}, inertia {:.3}",
            c.k,
            self.k_grid,
            c.db_index.map_or("-".into(), |d| format!("{d:.4}")),
            c.inertia
        );
        let _ = writeln!(out, "cluster sizes: {:?}", c.sizes);
        out.push('\n');
        out.push_str(&self.sample.render());
        out.push_str("\ntest-set difficulty and coverage\n");
        out.push_str(&curation_table(&self.curation));
        out.push_str("\nstrategy comparison\n");
        out.push_str(&self.comparison.comparison_table());
        out
    }
}
