//! Region/contour scores for two masks, then a ranked results table.

use memvos::metrics::{counts, leaderboard, round4, LeaderboardRow};
use memvos::{mean_jf, BinaryMask};

fn main() -> memvos::Result<()> {
    let p = BinaryMask::from_bits(2, 4, &[1, 1, 0, 0, 1, 1, 1, 0])?;
    let g = BinaryMask::from_bits(2, 4, &[0, 1, 1, 0, 0, 1, 1, 0])?;
    let c = counts(&p, &g)?;
    println!(
        "|P|={} |G|={} |P∩G|={}  J={:.4} precision={:.4} recall={:.4} F={:.4}",
        c.predicted,
        c.truth,
        c.intersection,
        c.jaccard(),
        c.precision(),
        c.recall(),
        c.f()
    );

    let rows: Vec<LeaderboardRow> = [
        ("yy", 0.7869, 0.8593),
        ("ISS", 0.7799, 0.8480),
        ("zz", 0.7823, 0.8609),
        ("xx", 0.7812, 0.8503),
    ]
    .into_iter()
    .map(|(name, j, f)| LeaderboardRow {
        name: name.into(),
        j,
        f,
        jf: mean_jf(j, f),
    })
    .collect();
    print!("\n{}", leaderboard(&rows));
    println!("\nround4(0.72985) = {}", round4(0.72985));
    Ok(())
}
