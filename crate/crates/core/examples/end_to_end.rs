//! Full two-phase clustering run on the synthetic 3-cluster toy set.
//!
//! `cargo run --release --example end_to_end [-- epochs iterations]`

use std::time::Instant;

use icicle::config::Config;
use icicle::data::{generate_dataset, SyntheticSpec};
use icicle::pipeline::{run_experiment, LogRecord};

fn main() -> icicle::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let mut config = Config::new(3);
    config.phase1.epochs = args.next().unwrap_or(config.phase1.epochs);
    config.phase2.iterations = args.next().unwrap_or(config.phase2.iterations);

    let dataset = generate_dataset(&SyntheticSpec::new(3, 100, 16, 0.05, 42))?;
    let start = Instant::now();
    let outcome = run_experiment(&dataset, &config)?;

    for record in outcome.log.iter().filter(|r| match r {
        LogRecord::Phase1(p) => p.epoch % 5 == 0,
        LogRecord::Phase2(p) => p.iteration % 25 == 0 || p.iteration == 1,
    }) {
        println!("{}", serde_json::to_string(record).expect("serializable"));
    }
    let m = outcome.metrics;
    println!("acc {:.4}  nmi {:.4}  ari {:.4}", m.acc, m.nmi, m.ari);
    print!("{}", outcome.confusion.to_csv());
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
