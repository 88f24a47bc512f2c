//! Stationary loss of deterministic threshold policies on the balking
//! single-server instance, exact and simulated.
//!
//! cargo run --release --example threshold_lower_bound

use moderation_pipeline::benchmark::{simulate_threshold, threshold_minimum, threshold_stationary};

fn main() -> moderation_pipeline::Result<()> {
    for l in [25u64, 100, 400, 1600] {
        let (best, f) = threshold_minimum(l, 4 * l);
        println!(
            "l = {l:>5}: min f = {f:>8.4} at theta = {best:>3}  (sqrt(l)/6 = {:.4})",
            (l as f64).sqrt() / 6.0
        );
    }

    let l = 100;
    println!();
    println!("{:>6} {:>10} {:>10}", "theta", "exact", "simulated");
    for theta in [5, 9, 10, 11, 20] {
        let sim = simulate_threshold(l, theta, 1_000_000, 7)?;
        println!(
            "{theta:>6} {:>10.4} {sim:>10.4}",
            threshold_stationary(l, theta)
        );
    }
    Ok(())
}
