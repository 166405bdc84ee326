//! Writes a run config and dataset, validates them with a dry run, then
//! trains phase 1 briefly and round-trips the checkpoint.

use icicle::checkpoint::Checkpoint;
use icicle::config::{Config, RunConfig};
use icicle::data::{generate_dataset, write_dataset, SyntheticSpec};
use icicle::pipeline::{load_phase1, phase1_checkpoint, phase1_features, run_pipeline, train_phase1};

fn main() -> icicle::Result<()> {
    let dir = std::env::temp_dir().join("icicle-config-example");
    std::fs::create_dir_all(&dir)?;

    let dataset = generate_dataset(&SyntheticSpec::new(3, 10, 12, 0.05, 1))?;
    write_dataset(&dataset, dir.join("toy.icg"))?;

    let mut config = Config::new(3);
    config.model.image_size = 12;
    config.phase1.epochs = 2;
    config.graph.k_b = 5;
    let run = RunConfig { config, data: dir.join("toy.icg"), out_dir: dir.join("out"), dry_run: true };
    let text = run.to_ini_string();
    std::fs::write(dir.join("run.ini"), &text)?;
    println!("{text}");

    let mut loaded = RunConfig::load(dir.join("run.ini"))?;
    loaded.dry_run = true;
    assert!(run_pipeline(&loaded)?.is_none());
    println!("dry run: config and data header agree");

    let mut log = Vec::new();
    let model = train_phase1(&dataset, &loaded.config, &mut log)?;
    let features = phase1_features(&model, &dataset)?;
    let path = dir.join("phase1.ick");
    phase1_checkpoint(&model, &features).save(&path)?;

    let ck = Checkpoint::load(&path)?;
    println!("checkpoint holds {} tensors: {}", ck.len(), ck.names().collect::<Vec<_>>().join(", "));
    let restored = load_phase1(&ck, &loaded.config)?;
    let again = phase1_features(&restored, &dataset)?;
    println!("restored features identical: {}", again == features);
    Ok(())
}
