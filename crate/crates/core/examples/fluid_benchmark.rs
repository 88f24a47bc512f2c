//! The w-fluid benchmark on the duty-cycle environment, for a few windows.
//!
//! cargo run --release --example fluid_benchmark

use moderation_pipeline::harness::scenario::duty_cycle;
use moderation_pipeline::solve_w_fluid;

fn main() -> moderation_pipeline::Result<()> {
    let env = duty_cycle(100, 5_000, 500, 400)?;
    println!(
        "{:>6} {:>14} {:>10} {:>8}",
        "w", "L*(w,T)", "L*/T", "windows"
    );
    for w in [1, 10, 100, 500, 1_000, env.horizon] {
        let fluid = solve_w_fluid(&env, w)?;
        println!(
            "{:>6} {:>14.3} {:>10.5} {:>8}",
            w,
            fluid.objective,
            fluid.objective / env.horizon as f64,
            fluid.windows.len()
        );
    }

    // Admission probabilities of the 1-fluid solution at the start of a
    // high- and a low-capacity stretch.
    let fluid = solve_w_fluid(&env, 1)?;
    for t in [1, 401] {
        let probs: Vec<String> = (0..env.num_types())
            .map(|k| {
                format!(
                    "{:.3}",
                    fluid.admission(&env, k, t) / env.arrival_rate(k, t)
                )
            })
            .collect();
        println!("t = {t:>4}: admit with probability {}", probs.join(", "));
    }
    Ok(())
}
