//! Ablation table at desk scale: supervised baseline, adversarial variant,
//! and the full semi-supervised model, trained per seed from identical
//! initializations and scored on one shared held-out set.
//!
//! The interesting readout is the trend, not the absolute numbers: with 10%
//! labels on appearance-diverse data, the full model should beat the
//! baseline on most seeds. Expect roughly nine minutes per seed batch on
//! one core.
//!
//! ```bash
//! cargo run --release --example ablation_trend [seeds]
//! ```

use swarmseg::data::{generate_synthetic, SyntheticConfig};
use swarmseg::train::{ablation, TrainConfig, ABLATION_MODELS};

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed count must be an integer"))
        .unwrap_or(5);
    let started = std::time::Instant::now();

    let mut scores = vec![Vec::new(); ABLATION_MODELS.len()];
    println!("seed  baseline  +adv    +adv+semi");
    for seed in 0..seeds {
        let data =
            generate_synthetic::<f32>(&SyntheticConfig::diverse(20, seed)).expect("generation");
        let eval_data =
            generate_synthetic::<f32>(&SyntheticConfig::diverse(12, seed + 1000))
                .expect("generation");
        let base = TrainConfig::ablation_demo(seed);
        let rows = ablation(&base, &data, &eval_data, &[0.1]).expect("ablation failed");
        println!(
            "{:>4}  {:.4}    {:.4}  {:.4}",
            seed, rows[0].report.score, rows[1].report.score, rows[2].report.score
        );
        for (i, row) in rows.iter().enumerate() {
            scores[i].push(row.report.score);
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let wins = scores[0]
        .iter()
        .zip(&scores[2])
        .filter(|(b, f)| f >= b)
        .count();
    println!();
    for (model, s) in ABLATION_MODELS.iter().zip(&scores) {
        println!("mean {model:<10} {:.4}", mean(s));
    }
    println!(
        "full model >= baseline on {wins}/{seeds} seeds, mean improvement {:+.4} ({:.1?})",
        mean(&scores[2]) - mean(&scores[0]),
        started.elapsed()
    );
}
