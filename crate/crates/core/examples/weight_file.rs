//! Saves the reference weights, reloads them and checks every tensor.

use memvos::weights::architecture;
use memvos::{EngineConfig, WeightSet};

fn main() -> memvos::Result<()> {
    let config = EngineConfig::default();
    let ws = WeightSet::reference(&config, 0)?;
    let path = std::env::temp_dir().join("memvos-reference.bin");
    ws.save(&path)?;
    let back = WeightSet::load(&path)?;
    back.validate(&config)?;
    assert_eq!(ws, back);
    let params: usize = ws.iter().map(|(_, t)| t.len()).sum();
    println!("{} tensors, {params} parameters, {} bytes at {}", ws.len(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0), path.display());
    for (name, shape) in architecture(&config).iter().filter(|(n, _)| n.starts_with("block0.")) {
        println!("  {name:<32} {shape:?}");
    }
    Ok(())
}
