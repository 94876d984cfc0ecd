//! Particle swarm on a quadratic bowl, repeated over many seeds.
//!
//! Each seed draws a hidden center c in [-4,4]^3 and maximizes -|x - c|^2
//! over [-5,5]^3 with 10 particles for 100 generations. The run reports how
//! often the swarm lands within 1e-2 of the center, whether every best-so-far
//! trace was nondecreasing, and that the fitness budget was spent exactly.
//!
//! ```bash
//! cargo run --release --example pso_sphere [seed_count]
//! ```

use swarmseg::pso::sphere_case;

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed count must be an integer"))
        .unwrap_or(100);

    let started = std::time::Instant::now();
    let mut hits = 0u64;
    let mut monotone = 0u64;
    let mut budget_exact = 0u64;
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let outcome = sphere_case(seed).expect("benchmark config is valid");
        if outcome.distance < 1e-2 {
            hits += 1;
        }
        if outcome.nondecreasing {
            monotone += 1;
        }
        if outcome.evaluations == 10 * 101 {
            budget_exact += 1;
        }
        if outcome.distance > worst {
            worst = outcome.distance;
        }
    }

    println!("seeds            {seeds}");
    println!("within 1e-2      {hits}");
    println!("monotone traces  {monotone}");
    println!("exact budget     {budget_exact}");
    println!("worst distance   {worst:.6}");
    println!("elapsed          {:.2?}", started.elapsed());
}
