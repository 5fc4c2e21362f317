//! One matching memory pixel hidden among fifty random ones: keeping only
//! the best affinity recovers its value, attending to all of them blurs it.

use memvos::backbone::FeatureMap;
use memvos::{init_bank, MemoryPolicy, Similarity, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const C: usize = 16;
const NOISE: usize = 50;

fn main() -> memvos::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = NOISE + 1;
    let keys: Vec<f32> = (0..C * m).map(|_| rng.sample(StandardNormal)).collect();
    let values: Vec<f32> = (0..C * m).map(|_| rng.sample(StandardNormal)).collect();
    // channel-major C × 1 × m; pixel 0 is the signal
    let key = FeatureMap::new(Tensor::new(vec![C, 1, m], keys.clone())?)?;
    let value = FeatureMap::new(Tensor::new(vec![C, 1, m], values.clone())?)?;
    let query: Vec<f32> = (0..C)
        .map(|c| keys[c * m] + 0.1 * rng.sample::<f32, _>(StandardNormal))
        .collect();
    let query = FeatureMap::new(Tensor::new(vec![C, 1, 1], query)?)?;
    let signal: Vec<f32> = (0..C).map(|c| values[c * m]).collect();

    for k in [1, 5, 20, m] {
        let policy = MemoryPolicy {
            capacity: 2,
            interval: 1,
            topk: k,
            similarity: Similarity::DotProduct,
        };
        let bank = init_bank(key.clone(), vec![value.clone()], policy)?;
        let out = bank.read(&query, 0)?.data.pixel(0, 0);
        let err: f32 = out.iter().zip(&signal).map(|(a, b)| (a - b).powi(2)).sum::<f32>().sqrt();
        println!("k={k:>2}  L2 error to signal value {err:.5}");
    }
    Ok(())
}
