use std::fs;
use std::path::{Path, PathBuf};

use aura_core::clustering::{self, ClusterModel};
use aura_core::dataset::{self, ClipCollection};
use aura_core::metrics;
use aura_core::sampling;
use aura_core::simulator::{self, ExperimentConfig, WorkloadSpec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, StageExt};
use crate::report::{ranking_only, ranking_table, DatasetSummary, PipelineReport, RankingComparison, SampleReport};
use crate::SimulateArgs;

pub const DATASET_MANIFEST: &str = "manifest.jsonl";
pub const DATASET_EMBEDDINGS: &str = "embeddings.bin";
pub const CLUSTER_SIDECAR: &str = "clusters.bin";
pub const CLUSTER_SUMMARY: &str = "clusters.json";
pub const SAMPLE_MANIFEST: &str = "sample.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const WORKLOAD_TRUTH: &str = "workload.json";

/// Files written by one command. Unless committed, everything written so far
/// is removed on drop, along with the directory if this command created it.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn create(dir: &Path) -> CliResult<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_owned(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_owned(),
            created_dir,
            written: Vec::new(),
            committed: false,
        })
    }

    fn write(
        &mut self,
        name: &str,
        stage: &'static str,
        f: impl FnOnce(&Path) -> aura_core::Result<()>,
    ) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        f(&path).stage(stage)?;
        Ok(path)
    }

    fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, text).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.write_text(name, &text)
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn load(config: &RunConfig) -> CliResult<ClipCollection> {
    dataset::load_collection(config.manifest()?, config.embeddings()?).stage("ingest")
}

fn load_model(path: &Path, collection: &ClipCollection) -> CliResult<ClusterModel> {
    let model = clustering::read_model(path).stage("cluster")?;
    if model.assignments.len() != collection.len() || model.dim() != collection.dim() {
        return Err(CliError::config(format!(
            "{} covers {} clips of dim {}, the collection has {} of dim {}",
            path.display(),
            model.assignments.len(),
            model.dim(),
            collection.len(),
            collection.dim()
        )));
    }
    Ok(model)
}

fn fit(config: &RunConfig, collection: &ClipCollection, seed: u64) -> CliResult<ClusterModel> {
    let params = &config.clustering;
    clustering::select_k(&collection.points(), &params.k_grid, seed, &params.kmeans()).stage("cluster")
}

fn listed(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn ingest(config: &RunConfig) -> CliResult<()> {
    let collection = load(config)?;
    let summary = DatasetSummary::of(&collection);
    println!("{}", summary.headline());
    println!("{}", summary.labels_line());
    if let Some(dir) = &config.paths.output_dir {
        let mut out = Outputs::create(dir)?;
        out.written.push(dir.join(DATASET_EMBEDDINGS));
        out.write(DATASET_MANIFEST, "ingest", |m| {
            dataset::write_collection(&collection, m, dir.join(DATASET_EMBEDDINGS))
        })?;
        listed(&out.commit());
    }
    Ok(())
}

pub fn cluster(config: &RunConfig) -> CliResult<()> {
    let seed = config.seed()?;
    let dir = config.output_dir()?;
    let collection = load(config)?;
    let model = fit(config, &collection, seed)?;
    let mut out = Outputs::create(dir)?;
    out.write(CLUSTER_SIDECAR, "cluster", |p| clustering::write_model(&model, p))?;
    out.write(CLUSTER_SUMMARY, "cluster", |p| clustering::write_summary(&model, p))?;
    println!(
        "k = {} (Davies-Bouldin {}), sizes {:?}",
        model.k,
        model.db_index.map_or("-".into(), |d| format!("{d:.4}")),
        model.sizes()
    );
    listed(&out.commit());
    Ok(())
}

pub fn sample(config: &RunConfig) -> CliResult<()> {
    let sampling = config.sampling_config()?;
    let dir = config.output_dir()?;
    let collection = load(config)?;
    let model = match &config.paths.clusters {
        Some(path) => Some(load_model(path, &collection)?),
        None if sampling.mode.is_stratified() => {
            return Err(CliError::config(format!("mode {} needs --clusters", sampling.mode)));
        }
        None => None,
    };
    let drawn = sampling::sample(&collection, model.as_ref(), &sampling).stage("sample")?;
    let mut out = Outputs::create(dir)?;
    out.write(SAMPLE_MANIFEST, "sample", |p| sampling::write_manifest(&drawn, p))?;
    println!("drew {} of {} clips ({})", drawn.len(), collection.len(), drawn.strategy_name);
    listed(&out.commit());
    Ok(())
}

pub fn rank(config: &RunConfig) -> CliResult<()> {
    let collection = load(config)?;
    let channel = config.metrics.channel;
    match &config.paths.sample {
        Some(path) => {
            let drawn = sampling::read_manifest(path, &collection).stage("rank")?;
            let comparison = RankingComparison::new(&collection, &drawn, channel).stage("rank")?;
            print!("{}", ranking_table(&comparison));
        }
        None => {
            let ranking = metrics::rank_models(&collection, channel).stage("rank")?;
            print!("{}", ranking_only(&ranking));
        }
    }
    if config.sampling.budget.is_some() {
        let sampling = config.sampling_config()?;
        let model = config
            .paths
            .clusters
            .as_deref()
            .map(|p| load_model(p, &collection))
            .transpose()?;
        if model.is_none() && sampling.mode.is_stratified() {
            return Err(CliError::config(format!("mode {} needs --clusters", sampling.mode)));
        }
        let f = metrics::bootstrap_srcc(&collection, model.as_ref(), &sampling, config.metrics.rounds).stage("rank")?;
        println!(
            "bootstrap SRCC over {} rounds of {} clips ({}): {:.4} ± {:.4}, 95% CI [{:.4}, {:.4}], {} degenerate",
            f.bootstrap_rounds,
            sampling.budget,
            sampling.mode,
            f.srcc_mean,
            f.srcc_std,
            f.ci95_low,
            f.ci95_high,
            f.degenerate_rounds
        );
    }
    Ok(())
}

pub fn report(config: &RunConfig) -> CliResult<()> {
    let collection = load(config)?;
    let model = load_model(config.clusters()?, &collection)?;
    let drawn = sampling::read_manifest(config.sample()?, &collection).stage("report")?;
    let baseline = config.baseline_labels()?;
    let report = SampleReport::new(&collection, &model, &drawn, baseline.as_ref(), config.metrics.top_n).stage("metrics")?;
    let text = report.render();
    print!("{text}");
    if let Some(dir) = &config.paths.output_dir {
        let mut out = Outputs::create(dir)?;
        out.write_json(REPORT_JSON, &report)?;
        out.write_text(REPORT_TEXT, &text)?;
        listed(&out.commit());
    }
    Ok(())
}

#[derive(Serialize)]
struct WorkloadTruth<'a> {
    spec: &'a WorkloadSpec,
    planted_order: Vec<&'a str>,
    model_quality: &'a [f64],
    cluster_difficulty: &'a [f64],
    separation: f64,
    clamp_events: usize,
}

pub fn simulate(config: &RunConfig, args: &SimulateArgs) -> CliResult<()> {
    let seed = config.seed()?;
    let dir = config.output_dir()?;
    let mut spec = match &args.workload {
        Some(path) => read_workload(path)?,
        None => WorkloadSpec::desk(seed),
    };
    spec.seed = seed;
    if let Some(n) = args.n_clips {
        spec.n_clips = n;
    }
    if let Some(k) = args.k_true {
        spec.k_true = k;
    }
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(m) = args.n_models {
        spec.n_models = m;
    }
    if let Some(f) = args.clean_fraction {
        spec.clean_fraction = f;
    }
    if let Some(s) = args.noise_std {
        spec.noise_std = s;
    }
    let workload = simulator::generate_workload(&spec).stage("simulate")?;
    let ids = workload.collection.model_ids();
    let truth = WorkloadTruth {
        spec: &spec,
        planted_order: workload.planted_order().into_iter().map(|j| ids[j].as_str()).collect(),
        model_quality: &workload.model_quality,
        cluster_difficulty: &workload.cluster_difficulty,
        separation: workload.separation,
        clamp_events: workload.clamp_events,
    };
    let mut out = Outputs::create(dir)?;
    out.written.push(dir.join(DATASET_EMBEDDINGS));
    out.write(DATASET_MANIFEST, "simulate", |m| workload.write(m, dir.join(DATASET_EMBEDDINGS)))?;
    out.write_json(WORKLOAD_TRUTH, &truth)?;
    println!("{}", DatasetSummary::of(&workload.collection).headline());
    listed(&out.commit());
    Ok(())
}

fn read_workload(path: &Path) -> CliResult<WorkloadSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        Ok(WorkloadSpec::from_json_str(&text)?)
    }
}

/// cluster → sample → metrics, then every output file at once.
pub fn pipeline(config: &RunConfig) -> CliResult<()> {
    let seed = config.seed()?;
    let budget = config.budget()?;
    let dir = config.output_dir()?;
    let sampling_config = config.sampling_config()?;
    let collection = load(config)?;
    if budget > collection.len() {
        return Err(CliError::config(format!(
            "budget {budget} exceeds the {} clips in the collection",
            collection.len()
        )));
    }
    let baseline = config.baseline_labels()?;

    let model = fit(config, &collection, seed)?;
    let drawn = sampling::sample(&collection, Some(&model), &sampling_config).stage("sample")?;

    let metrics = &config.metrics;
    let sample_report =
        SampleReport::new(&collection, &model, &drawn, baseline.as_ref(), metrics.top_n).stage("metrics")?;
    let curation = simulator::curation_report(
        &collection,
        &model,
        budget,
        seed,
        config.sampling.epsilon,
        baseline.as_ref(),
        &[],
    )
    .stage("metrics")?;
    let mut experiment = ExperimentConfig::new(vec![budget], seed);
    experiment.strategies = metrics.strategies.clone();
    experiment.rounds = metrics.rounds;
    experiment.primary_channel = metrics.channel;
    experiment.epsilon = config.sampling.epsilon;
    experiment.baseline_labels = baseline;
    let comparison = simulator::run_experiment(&collection, &model, &experiment).stage("metrics")?;

    let report = PipelineReport {
        dataset: DatasetSummary::of(&collection),
        k_grid: config.clustering.k_grid.clone(),
        clustering: (&model).into(),
        sample: sample_report,
        curation,
        comparison,
    };
    let text = report.render();

    let mut out = Outputs::create(dir)?;
    out.write(CLUSTER_SIDECAR, "cluster", |p| clustering::write_model(&model, p))?;
    out.write(CLUSTER_SUMMARY, "cluster", |p| clustering::write_summary(&model, p))?;
    out.write(SAMPLE_MANIFEST, "sample", |p| sampling::write_manifest(&drawn, p))?;
    out.write_json(REPORT_JSON, &report)?;
    out.write_text(REPORT_TEXT, &text)?;
    print!("{text}");
    listed(&out.commit());
    Ok(())
}
