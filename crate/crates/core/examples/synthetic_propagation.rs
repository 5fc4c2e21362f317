//! Propagates the first-frame mask of a synthetic scene and scores it.
//!
//! cargo run --release --example synthetic_propagation -- translate 0,1,2

use std::time::Instant;

use memvos::metrics::format_sequence;
use memvos::{evaluate_sequence, propagate, synth_generate, EngineConfig, Scenario, SynthSpec};

fn main() -> memvos::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: Scenario = args.next().as_deref().unwrap_or("translate").parse()?;
    let seeds: Vec<u64> = args
        .next()
        .unwrap_or_else(|| "0".into())
        .split(',')
        .map(|s| s.parse().expect("seed"))
        .collect();
    let step = if kind == Scenario::Crossing { 3 } else { 2 };
    let spec = SynthSpec::scenario(kind, 128, 24, step);
    let config = EngineConfig {
        target_short_side: None,
        ..EngineConfig::default()
    };
    for seed in seeds {
        let start = Instant::now();
        let seq = synth_generate(&spec, seed)?;
        let pred = propagate(&seq, &config)?;
        let gt = seq.gt.as_ref().expect("synthetic ground truth");
        let report = evaluate_sequence(&pred, gt, &seq.first_annotation.object_ids())?;
        print!("{}", format_sequence(&seq.name, &report));
        println!("# {:.2?}", start.elapsed());
    }
    Ok(())
}
