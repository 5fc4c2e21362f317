//! Which frames the pixel memory keeps as a video streams past.
//!
//! cargo run --example memory_policy -- <interval> <capacity> <frames>

use memvos::backbone::FeatureMap;
use memvos::{init_bank, MemoryPolicy, Similarity};

fn main() -> memvos::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let (r, t_max, frames) = match args[..] {
        [r, t, n] => (r, t, n),
        _ => (3, 15, 100),
    };
    let policy = MemoryPolicy {
        capacity: t_max,
        interval: r,
        topk: 60,
        similarity: Similarity::DotProduct,
    };
    let blank = || (FeatureMap::zeros(1, 1, 1), vec![FeatureMap::zeros(1, 1, 1)]);
    let (k, v) = blank();
    let mut bank = init_bank(k, v, policy)?;
    for t in 1..=frames {
        let (k, v) = blank();
        if bank.maybe_add(t, k, v)? && t % (r * 5) == 0 {
            println!("after frame {t:>3}: {:?}", bank.frame_indices());
        }
    }
    println!("\nfinal bank ({} entries):\n{}", bank.len(), bank.dump());
    println!("evicted in order: {:?}", bank.evicted());
    Ok(())
}
