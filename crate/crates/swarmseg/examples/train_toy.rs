//! Desk-scale end-to-end training run on synthetic data.
//!
//! Generates 20 images, labels 10% of them, trains the adversarial
//! semi-supervised objective for a few hundred iterations, and reports
//! pooled-pixel ROC AUC, PR AUC and their average on a held-out set.
//!
//! ```bash
//! cargo run --release --example train_toy [iterations]
//! ```

use swarmseg::data::{generate_synthetic, split_labeled, SyntheticConfig};
use swarmseg::train::{evaluate, train, TrainConfig};

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iteration count must be an integer"))
        .unwrap_or(500);

    let data_cfg = SyntheticConfig {
        seed: 3,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic::<f32>(&data_cfg).expect("generation failed");
    let data = split_labeled(data, 0.1, data_cfg.seed).expect("split failed");
    let eval_cfg = SyntheticConfig {
        image_count: 10,
        seed: data_cfg.seed + 1000,
        ..data_cfg
    };
    let eval_data = generate_synthetic::<f32>(&eval_cfg).expect("generation failed");

    let mut config = TrainConfig::toy(11);
    config.iterations = iterations;
    config.weights.warmup_iters = iterations / 4;
    config.eval_every = (iterations / 5).max(1);

    let started = std::time::Instant::now();
    let out = train(&config, &data, Some(&eval_data)).expect("training failed");
    println!("iteration  total_loss  d_loss");
    for row in out.history.iter().step_by((iterations as usize / 10).max(1)) {
        println!("{:>9}  {:>10.4}  {:>6.4}", row.iteration, row.total, row.d_loss);
    }
    println!();
    println!("iteration  roc_auc  pr_auc  score");
    for (iter, report) in &out.evals {
        println!(
            "{:>9}  {:.4}   {:.4}  {:.4}",
            iter, report.roc_auc, report.pr_auc, report.score
        );
    }

    let final_report = evaluate(&out.state.segmenter, &eval_data).expect("evaluation failed");
    println!();
    println!(
        "final: roc_auc={:.4} pr_auc={:.4} score={:.4} ({:.1?} for {} iterations)",
        final_report.roc_auc,
        final_report.pr_auc,
        final_report.score,
        started.elapsed(),
        iterations
    );
}
