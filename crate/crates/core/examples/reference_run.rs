//! Full seven-model run on the calibrated synthetic data at reference size.
//!
//!     cargo run --release -p sevpred-core --example reference_run [models]
//!
//! `models` is an optional comma-separated subset such as `lr,nb`. Set
//! RUST_LOG=info for per-model timings.

use std::time::Instant;

use sevpred::config::{parse_model_list, ModelKind, RunConfig, SynthSource};
use sevpred::report::render_table;

fn main() -> Result<(), sevpred::Error> {
    env_logger::init();
    let models = match std::env::args().nth(1) {
        Some(list) => parse_model_list(&list)?,
        None => ModelKind::ALL.to_vec(),
    };
    let config = RunConfig {
        synth: Some(SynthSource { n: 15_840, seed: 1 }),
        seed: Some(42),
        models,
        ..Default::default()
    };
    let start = Instant::now();
    let output = sevpred::pipeline::run(&config)?;
    print!("{}", render_table(&output.reports())?);
    println!("selected: {}", output.selected.join(", "));
    println!("elapsed: {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
