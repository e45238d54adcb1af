//! Run configuration: an optional TOML or JSON file, then command-line
//! overrides on top.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use aura_core::clustering::{DEFAULT_MAX_ITER, DEFAULT_RESTARTS, DEFAULT_TOL};
use aura_core::clustering::KMeansConfig;
use aura_core::dataset::Channel;
use aura_core::metrics::DEFAULT_ROUNDS;
use aura_core::sampling::{SamplingConfig, SamplingMode, DEFAULT_EPSILON};
use aura_core::simulator::Strategy;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub clustering: ClusteringParams,
    pub sampling: SamplingParams,
    pub metrics: MetricParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Cluster sidecar read by `sample` and `report`.
    pub clusters: Option<PathBuf>,
    /// Sample manifest read by `rank` and `report`.
    pub sample: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    pub k_grid: Vec<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Candidates per kmeans++ step; 0 chooses from k.
    pub seeding_trials: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            k_grid: (2..=16).collect(),
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            seeding_trials: 0,
        }
    }
}

impl ClusteringParams {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
            seeding_trials: self.seeding_trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub budget: Option<usize>,
    pub mode: SamplingMode,
    pub epsilon: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            budget: None,
            mode: SamplingMode::Ranking,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    /// Channel used for ranking and for variance weights.
    pub channel: Channel,
    pub rounds: usize,
    /// Text file with one noise label per line.
    pub baseline_labels: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
    pub top_n: usize,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            channel: Channel::Ovrl,
            rounds: DEFAULT_ROUNDS,
            baseline_labels: None,
            strategies: Strategy::ALL.to_vec(),
            top_n: 10,
        }
    }
}

/// Flags shared by every subcommand. Anything given here wins over the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; there is no time-based default.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    #[arg(long = "out", value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub clusters: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub sample: Option<PathBuf>,
    /// Candidate cluster counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// hardness, ranking (alias aura), random, diversity or variance.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// sig, bak or ovrl.
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub baseline_labels: Option<PathBuf>,
    /// Strategies compared by `pipeline`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut config: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        };
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.manifest,
            &mut p.embeddings,
            &mut p.output_dir,
            &mut p.clusters,
            &mut p.sample,
            &mut self.metrics.baseline_labels,
        ] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn resolve(args: &RunArgs) -> CliResult<Self> {
        let mut config = match &args.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply(args)?;
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, args: &RunArgs) -> CliResult<()> {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        fn set_opt<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set_opt(&mut self.seed, &args.seed);
        set_opt(&mut self.paths.manifest, &args.manifest);
        set_opt(&mut self.paths.embeddings, &args.embeddings);
        set_opt(&mut self.paths.output_dir, &args.output_dir);
        set_opt(&mut self.paths.clusters, &args.clusters);
        set_opt(&mut self.paths.sample, &args.sample);
        set(&mut self.clustering.k_grid, &args.k_grid);
        set(&mut self.clustering.restarts, &args.restarts);
        set(&mut self.clustering.max_iter, &args.max_iter);
        set(&mut self.clustering.tol, &args.tol);
        set_opt(&mut self.sampling.budget, &args.budget);
        set(&mut self.sampling.epsilon, &args.epsilon);
        set(&mut self.metrics.rounds, &args.rounds);
        set_opt(&mut self.metrics.baseline_labels, &args.baseline_labels);
        if let Some(mode) = &args.mode {
            self.sampling.mode = mode.parse()?;
        }
        if let Some(channel) = &args.channel {
            self.metrics.channel = channel.parse()?;
        }
        if let Some(names) = &args.strategies {
            self.metrics.strategies = names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
        }
        Ok(())
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.clustering;
        if c.k_grid.is_empty() || c.k_grid.contains(&0) {
            return Err(CliError::config("k_grid must list positive cluster counts"));
        }
        if c.restarts == 0 || c.max_iter == 0 {
            return Err(CliError::config("restarts and max_iter must be at least 1"));
        }
        if c.tol.is_nan() || c.tol < 0.0 {
            return Err(CliError::config("tol must be non-negative"));
        }
        if !self.sampling.epsilon.is_finite() || self.sampling.epsilon <= 0.0 {
            return Err(CliError::config("epsilon must be a positive number"));
        }
        if self.sampling.budget == Some(0) {
            return Err(CliError::config("budget must be at least 1"));
        }
        if self.metrics.rounds == 0 {
            return Err(CliError::config("rounds must be at least 1"));
        }
        if self.metrics.strategies.is_empty() {
            return Err(CliError::config("at least one strategy is required"));
        }
        if self.metrics.top_n == 0 {
            return Err(CliError::config("top_n must be at least 1"));
        }
        for path in [&self.paths.manifest, &self.paths.embeddings, &self.metrics.baseline_labels]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(CliError::config(format!("input file not found: {}", path.display())));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::config("--seed is required"))
    }

    pub fn manifest(&self) -> CliResult<&Path> {
        required(&self.paths.manifest, "--manifest")
    }

    pub fn embeddings(&self) -> CliResult<&Path> {
        required(&self.paths.embeddings, "--embeddings")
    }

    pub fn output_dir(&self) -> CliResult<&Path> {
        required(&self.paths.output_dir, "--out")
    }

    pub fn clusters(&self) -> CliResult<&Path> {
        required(&self.paths.clusters, "--clusters")
    }

    pub fn sample(&self) -> CliResult<&Path> {
        required(&self.paths.sample, "--sample")
    }

    pub fn budget(&self) -> CliResult<usize> {
        self.sampling.budget.ok_or_else(|| CliError::config("--budget is required"))
    }

    pub fn sampling_config(&self) -> CliResult<SamplingConfig> {
        Ok(SamplingConfig::new(self.budget()?, self.sampling.mode, self.seed()?)
            .with_channel(self.metrics.channel)
            .with_epsilon(self.sampling.epsilon))
    }

    pub fn baseline_labels(&self) -> CliResult<Option<HashSet<String>>> {
        self.metrics.baseline_labels.as_deref().map(read_labels).transpose()
    }
}

fn required<'a>(slot: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    slot.as_deref()
        .ok_or_else(|| CliError::config(format!("{flag} is required (flag or config file)")))
}

/// One label per line; blank lines and `#` comments are skipped.
pub fn read_labels(path: &Path) -> CliResult<HashSet<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}
