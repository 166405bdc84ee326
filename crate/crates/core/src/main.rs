use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use icicle::checkpoint::Checkpoint;
use icicle::config::RunConfig;
use icicle::data::{generate_dataset, read_dataset, write_dataset, SyntheticSpec};
use icicle::graph::build_knn_graph;
use icicle::metrics::{MetricsReport, Partition};
use icicle::pipeline::{
    build_graphs, load_phase1, log_to_jsonl, phase1_checkpoint, phase1_features, train_phase1, train_phase2,
    FEATURES_KEY,
};
use icicle::{Error, Result};

#[derive(Parser)]
#[command(name = "icicle", version, about = "Two-phase contrastive and graph-based image clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Phase 1: contrastive training; writes a checkpoint with features.
    TrainPhase1 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON-lines loss log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Dumps the k-NN graph of checkpointed features as an edge list.
    Graph {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        t_heat: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Phase 2: trident self-training from a phase-1 checkpoint.
    TrainPhase2 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        labels_out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Prints acc,nmi,ari of predicted labels against true labels.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Runs the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Generates a synthetic colour-texture dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 100)]
        per_cluster: usize,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the ground-truth labels, one per line.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf) -> Result<icicle::config::Config> {
    let config = RunConfig::load(path)?.config;
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Data {
            command:
                DataCommand::Gen {
                    out,
                    clusters,
                    per_cluster,
                    size,
                    noise,
                    seed,
                    labels_out,
                },
        } => {
            let dataset = generate_dataset(&SyntheticSpec::new(clusters, per_cluster, size, noise, seed))?;
            write_dataset(&dataset, &out)?;
            if let Some(path) = labels_out {
                let truth = Partition::new(dataset.labels().to_vec(), clusters)?;
                fs::write(path, truth.to_text())?;
            }
        }
        Command::TrainPhase1 { data, config, out, log } => {
            let config = load_config(&config)?;
            let dataset = read_dataset(&data)?;
            icicle::pipeline::check_header(&icicle::pipeline::dataset_header(&dataset), &config)?;
            let mut records = Vec::new();
            let model = train_phase1(&dataset, &config, &mut records)?;
            let features = phase1_features(&model, &dataset)?;
            phase1_checkpoint(&model, &features).save(&out)?;
            if let Some(path) = log {
                fs::write(path, log_to_jsonl(&records))?;
            }
        }
        Command::Graph { features, k, t_heat, out } => {
            let ck = Checkpoint::load(&features)?;
            let z = ck
                .get(FEATURES_KEY)
                .ok_or_else(|| Error::Validation(format!("checkpoint has no {FEATURES_KEY:?} tensor")))?;
            fs::write(out, build_knn_graph(z, k, t_heat)?.edge_list_text())?;
        }
        Command::TrainPhase2 {
            data,
            ckpt,
            config,
            out,
            labels_out,
            log,
        } => {
            let config = load_config(&config)?;
            let dataset = read_dataset(&data)?;
            icicle::pipeline::check_header(&icicle::pipeline::dataset_header(&dataset), &config)?;
            let model = load_phase1(&Checkpoint::load(&ckpt)?, &config)?;
            let z = phase1_features(&model, &dataset)?;
            let graphs = build_graphs(&z, &config)?;
            let mut records = Vec::new();
            let outcome = train_phase2(&model, &z, &graphs, &config, &mut records)?;
            Checkpoint::from_params(outcome.state.trident.params()).save(&out)?;
            fs::write(labels_out, outcome.partition.to_text())?;
            if let Some(path) = log {
                fs::write(path, log_to_jsonl(&records))?;
            }
        }
        Command::Eval { truth, pred } => {
            let truth = Partition::parse(&fs::read_to_string(truth)?)?;
            let pred = Partition::parse(&fs::read_to_string(pred)?)?;
            print!("{}", MetricsReport::evaluate(&truth, &pred)?.to_csv());
        }
        Command::Run { config, dry_run } => {
            let mut run = RunConfig::load(&config)?;
            run.dry_run = dry_run;
            match icicle::pipeline::run_pipeline(&run)? {
                Some(outcome) => print!("{}", outcome.metrics.to_csv()),
                None => println!("config and data header are valid"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
