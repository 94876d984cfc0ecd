//! Finite-difference audit of the full training objective.
//!
//! Each case draws a small segmenter, a frozen discriminator, an 8x8 labeled
//! pair and an 8x8 unlabeled image, then treats the composite loss (bce +
//! 0.1 adv + 0.004 semi_adv + 0.1 semi_bce) as a scalar function of every
//! segmenter parameter. The analytic tape gradient is compared against
//! central differences element by element; the printed figure is the worst
//! relative error seen anywhere.
//!
//! ```bash
//! cargo run --release --example autodiff_check [cases]
//! ```

use swarmseg::gradcheck::composite_case;

fn main() {
    let cases: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("case count must be an integer"))
        .unwrap_or(100);
    let started = std::time::Instant::now();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let err = composite_case(case);
        if err > worst {
            worst = err;
            println!("case {case}: new worst {err:.3e}");
        }
    }
    println!("cases            {cases}");
    println!("worst rel error  {worst:.3e}");
    println!("elapsed          {:.2?}", started.elapsed());
}
