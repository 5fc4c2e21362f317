//! Writes a synthetic dataset as PPM/PGM files, segments it from disk and
//! scores the result, the same path the `run` and `eval` commands take.

use memvos::cli;
use memvos::{io, synth_generate, EngineConfig, Scenario, SynthSpec};

fn main() -> memvos::Result<()> {
    let root = std::env::temp_dir().join("memvos-dataset");
    let data = root.join("data");
    let out = root.join("pred");
    for (kind, step) in [(Scenario::Translate, 2), (Scenario::Crossing, 3)] {
        io::write_sequence(&data, &synth_generate(&SynthSpec::scenario(kind, 96, 12, step), 7)?)?;
    }
    let config = EngineConfig {
        target_short_side: None,
        ..EngineConfig::default()
    };
    cli::run(&data, &out, &config)?;
    print!("{}", cli::eval(&out, &data)?);
    println!("\nmasks under {}", out.display());
    Ok(())
}
