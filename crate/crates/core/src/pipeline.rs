//! End-to-end driver: phase 1, feature extraction, graphs, k-means, phase 2,
//! evaluation and artifact output.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{Config, GraphMode, RunConfig};
use crate::contrastive::{train_phase1_epoch, LossReport, Phase1Model};
use crate::data::{read_dataset, read_dataset_header, DatasetHeader, ImageDataset};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, normalize_adjacency, KnnGraph, NormalizedAdjacency};
use crate::metrics::{confusion_matrix, ConfusionMatrix, MetricsReport, Partition};
use crate::mgcn::{
    bottleneck_features, kmeans_init_centers, train_phase2_iteration, Phase2Report, Trident, TridentState,
    ROW_SUM_TOL,
};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

/// Every file a run writes into its output directory.
pub const OUTPUT_FILES: &[&str] = &[
    "metrics.csv",
    "labels.txt",
    "confusion.csv",
    "train_log.jsonl",
    "phase1.ick",
    "phase2.ick",
    "graph_a.txt",
    "graph_b.txt",
];

/// Batch size for gradient-free feature extraction.
const EXTRACT_BATCH: usize = 256;

/// RNG streams per stage, so changing one stage's draws leaves the others alone.
const STREAM_PHASE1: u64 = 1;
const STREAM_PHASE2: u64 = 2;

fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum LogRecord {
    Phase1(LossReport),
    Phase2(Phase2Report),
}

pub fn log_to_jsonl(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("plain numeric record"));
        out.push('\n');
    }
    out
}

/// Checks a dataset header against the model geometry and graph sizes.
pub fn check_header(header: &DatasetHeader, config: &Config) -> Result<()> {
    let s = config.model.image_size;
    if header.c != 3 || header.h != s || header.w != s {
        return Err(Error::Validation(format!(
            "data images are {}x{}x{}, model expects 3x{s}x{s}",
            header.c, header.h, header.w
        )));
    }
    if header.k != config.num_clusters {
        return Err(Error::Validation(format!(
            "data declares {} clusters, config has {}",
            header.k, config.num_clusters
        )));
    }
    let k_max = config.graph.k_a.max(config.graph.k_b);
    if header.n <= k_max || header.n < config.num_clusters {
        return Err(Error::Validation(format!(
            "{} samples are too few for k = {k_max} and K = {}",
            header.n, config.num_clusters
        )));
    }
    Ok(())
}

pub fn dataset_header(dataset: &ImageDataset) -> DatasetHeader {
    let s = dataset.images().shape();
    DatasetHeader {
        n: s[0],
        c: s[1],
        h: s[2],
        w: s[3],
        k: dataset.num_clusters(),
    }
}

/// Phase 1 from a fresh seeded model; one log record per epoch.
pub fn train_phase1(dataset: &ImageDataset, config: &Config, log: &mut Vec<LogRecord>) -> Result<Phase1Model> {
    let mut rng = stage_rng(config.seed, STREAM_PHASE1);
    let mut model = Phase1Model::new(config, &mut rng)?;
    let mut adam = Adam::new(AdamConfig::with_lr(config.phase1.lr));
    for epoch in 1..=config.phase1.epochs {
        let report = train_phase1_epoch(&mut model, &mut adam, dataset, config, epoch, &mut rng)?;
        log.push(LogRecord::Phase1(report));
    }
    Ok(model)
}

/// Backbone features of the unaugmented images.
pub fn phase1_features(model: &Phase1Model, dataset: &ImageDataset) -> Result<Tensor> {
    model.extract_features(dataset.images(), EXTRACT_BATCH)
}

/// The two stream graphs and their propagation operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Graphs {
    pub knn_a: KnnGraph,
    pub knn_b: KnnGraph,
    pub adj_a: NormalizedAdjacency,
    pub adj_b: NormalizedAdjacency,
}

pub fn build_graphs(z: &Tensor, config: &Config) -> Result<Graphs> {
    let g = &config.graph;
    let (k_a, k_b) = match g.mode {
        GraphMode::Dual => (g.k_a, g.k_b),
        GraphMode::SingleA => (g.k_a, g.k_a),
        GraphMode::SingleB => (g.k_b, g.k_b),
    };
    let knn_a = build_knn_graph(z, k_a, g.t_heat)?;
    let knn_b = if k_b == k_a {
        knn_a.clone()
    } else {
        build_knn_graph(z, k_b, g.t_heat)?
    };
    Ok(Graphs {
        adj_a: normalize_adjacency(&knn_a),
        adj_b: normalize_adjacency(&knn_b),
        knn_a,
        knn_b,
    })
}

#[derive(Debug, Clone)]
pub struct Phase2Outcome {
    pub state: TridentState,
    pub reports: Vec<Phase2Report>,
    pub partition: Partition,
    /// Iterations whose row sums strayed more than [`ROW_SUM_TOL`] from 1.
    pub row_sum_violations: usize,
}

/// k-means centers on the pre-trained bottleneck, then full-batch phase 2.
pub fn train_phase2(
    phase1: &Phase1Model,
    z: &Tensor,
    graphs: &Graphs,
    config: &Config,
    log: &mut Vec<LogRecord>,
) -> Result<Phase2Outcome> {
    let mut rng = stage_rng(config.seed, STREAM_PHASE2);
    let autoencoder = phase1.autoencoder.clone();
    let h = bottleneck_features(&autoencoder, z)?;
    let centers = kmeans_init_centers(&h, config.num_clusters, config.seed)?.centers;
    let shared_init = config.graph.mode != GraphMode::Dual;
    let trident = Trident::new(autoencoder, shared_init, &mut rng);
    let mut state = TridentState::new(
        trident,
        graphs.adj_a.clone(),
        graphs.adj_b.clone(),
        centers,
        config.phase2.clone(),
    )?;
    let mut adam = Adam::new(AdamConfig::with_lr(config.phase2.lr));
    let mut reports = Vec::with_capacity(config.phase2.iterations);
    for it in 1..=config.phase2.iterations {
        let report = train_phase2_iteration(&mut state, &mut adam, z, it)?;
        log.push(LogRecord::Phase2(report));
        reports.push(report);
    }
    let row_sum_violations = reports
        .iter()
        .filter(|r| r.max_row_deviation > ROW_SUM_TOL)
        .count();
    let partition = state.assign(z)?;
    Ok(Phase2Outcome {
        state,
        reports,
        partition,
        row_sum_violations,
    })
}

/// Everything an in-memory run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub phase1: Phase1Model,
    pub features: Tensor,
    pub graphs: Graphs,
    pub phase2: Phase2Outcome,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub log: Vec<LogRecord>,
}

/// The full two-phase algorithm on an in-memory dataset.
pub fn run_experiment(dataset: &ImageDataset, config: &Config) -> Result<RunOutcome> {
    stage("config", config.validate())?;
    stage("data", check_header(&dataset_header(dataset), config))?;
    let mut log = Vec::new();
    let phase1 = stage("phase1", train_phase1(dataset, config, &mut log))?;
    let features = stage("features", phase1_features(&phase1, dataset))?;
    let graphs = stage("graph", build_graphs(&features, config))?;
    let phase2 = stage("phase2", train_phase2(&phase1, &features, &graphs, config, &mut log))?;
    let truth = stage(
        "eval",
        Partition::new(dataset.labels().to_vec(), dataset.num_clusters()),
    )?;
    let metrics = stage("eval", MetricsReport::evaluate(&truth, &phase2.partition))?;
    let confusion = stage("eval", confusion_matrix(&truth, &phase2.partition))?;
    Ok(RunOutcome {
        phase1,
        features,
        graphs,
        phase2,
        metrics,
        confusion,
        log,
    })
}

/// Writes every artifact of `outcome` into `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), outcome.metrics.to_csv())?;
    fs::write(dir.join("labels.txt"), outcome.phase2.partition.to_text())?;
    fs::write(dir.join("confusion.csv"), outcome.confusion.to_csv())?;
    fs::write(dir.join("train_log.jsonl"), log_to_jsonl(&outcome.log))?;
    fs::write(dir.join("graph_a.txt"), outcome.graphs.knn_a.edge_list_text())?;
    fs::write(dir.join("graph_b.txt"), outcome.graphs.knn_b.edge_list_text())?;
    phase1_checkpoint(&outcome.phase1, &outcome.features).save(dir.join("phase1.ick"))?;
    Checkpoint::from_params(outcome.phase2.state.trident.params()).save(dir.join("phase2.ick"))?;
    Ok(())
}

/// Name under which phase-1 checkpoints carry the extracted features.
pub const FEATURES_KEY: &str = "features";

/// Phase-1 parameters plus the extracted features.
pub fn phase1_checkpoint(model: &Phase1Model, features: &Tensor) -> Checkpoint {
    let mut ck = Checkpoint::from_params(model.params());
    ck.insert(FEATURES_KEY, features.clone());
    ck
}

/// Rebuilds a phase-1 model of `config`'s shape from a checkpoint.
pub fn load_phase1(ck: &Checkpoint, config: &Config) -> Result<Phase1Model> {
    let mut model = Phase1Model::new(config, &mut stage_rng(0, 0))?;
    ck.restore(model.params_mut())?;
    Ok(model)
}

/// Runs the configured pipeline. A dry run validates the config and the data
/// header and returns `None` without writing anything.
pub fn run_pipeline(run: &RunConfig) -> Result<Option<RunOutcome>> {
    stage("config", run.validate())?;
    if run.dry_run {
        let header = stage("data", read_dataset_header(&run.data))?;
        stage("data", check_header(&header, &run.config))?;
        return Ok(None);
    }
    let dataset = stage("data", read_dataset(&run.data))?;
    let outcome = run_experiment(&dataset, &run.config)?;
    stage("output", write_outputs(&outcome, &run.out_dir))?;
    Ok(Some(outcome))
}
