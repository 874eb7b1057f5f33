//! Percentile bootstrap of a mean difference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use salience::evaluation::percentile_bootstrap;

fn main() -> salience::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.2, 1.0).expect("valid normal");
    let differences: Vec<f64> = (0..60).map(|_| noise.sample(&mut rng)).collect();

    let result = percentile_bootstrap(&differences, 10_000, 0)?;
    println!("mean        {:+.4}", result.mean);
    println!("median      {:+.4}", result.median);
    println!("std. error  {:.4}", result.standard_error);
    println!("95% CI      [{:+.4}, {:+.4}]", result.ci_low, result.ci_high);
    println!("p (H0: 0)   {:.4}", result.p_value);
    Ok(())
}
