//! Real hyperparameter search at desk scale.
//!
//! Each particle's fitness is a shortened training run scored on two images
//! held out of that run, so the search takes a few minutes even at this
//! size. The swarm explores the triple (lambda_semi_adv, lambda_semi_bce,
//! t_semi_mask) inside the box [0,0.01] x [0,0.3] x [0,0.5].
//!
//! ```bash
//! cargo run --release --example tune_weights
//! ```

use swarmseg::data::{generate_synthetic, split_labeled, SyntheticConfig};
use swarmseg::train::{pso_tune, TrainConfig, TuneConfig};

fn main() {
    let data_cfg = SyntheticConfig {
        image_count: 12,
        image_size: 32,
        seed: 9,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic::<f32>(&data_cfg).expect("generation failed");
    let data = split_labeled(data, 0.25, data_cfg.seed).expect("split failed");

    let mut base = TrainConfig::toy(9);
    base.iterations = 400;
    base.weights.warmup_iters = 100;
    let mut config = TuneConfig::new(base);
    config.fitness_iterations = 100;
    config.pso.generations = 4;
    config.pso.swarm_size = 3;

    let started = std::time::Instant::now();
    let out = pso_tune(&config, &data).expect("tuning failed");
    println!("generation  best_fitness");
    for row in &out.run.trace.rows {
        println!("{:>10}  {:.4}", row.generation, row.best_fitness);
    }
    println!();
    println!(
        "best: lambda_semi_adv={:.5} lambda_semi_bce={:.5} t_semi_mask={:.5} fitness={:.4}",
        out.best_weights.lambda_semi_adv,
        out.best_weights.lambda_semi_bce,
        out.best_weights.t_semi_mask,
        out.run.best_fitness
    );
    println!(
        "evaluations      {} ({:.2?} total)",
        out.run.evaluations,
        started.elapsed()
    );
}
