//! Each augmentation branch on its own, then all four averaged.

use memvos::pipeline::run_tta_with;
use memvos::{evaluate_sequence, synth_generate, Augmentation, EngineConfig, Scenario, SynthSpec, WeightSet};

fn main() -> memvos::Result<()> {
    let seq = synth_generate(&SynthSpec::scenario(Scenario::Crossing, 96, 16, 3), 5)?;
    let gt = seq.gt.as_ref().expect("synthetic ground truth");
    let base = EngineConfig {
        target_short_side: None,
        ..EngineConfig::default()
    };
    let weights = WeightSet::for_config(&base)?;
    let all = vec![
        Augmentation::Identity,
        Augmentation::HorizontalFlip,
        Augmentation::Scale075,
        Augmentation::Scale125,
    ];
    let mut branches: Vec<Vec<Augmentation>> = all.iter().map(|a| vec![*a]).collect();
    branches.push(all);
    for tta in branches {
        let names: Vec<&str> = tta.iter().map(|a| a.name()).collect();
        let config = EngineConfig { tta, ..base.clone() };
        let pred = run_tta_with(&seq, &config, &weights)?;
        let r = evaluate_sequence(&pred, gt, &[1, 2])?.overall;
        println!("{:<40} J={:.4} F={:.4} J&F={:.4}", names.join("+"), r.j, r.f, r.jf_mean);
    }
    Ok(())
}
