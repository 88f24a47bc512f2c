//! Congestion-unaware baselines against BACID on the one-type instance.
//!
//! cargo run --release --example known_policies

use moderation_pipeline::harness::{preset, run_experiment};

fn main() -> moderation_pipeline::Result<()> {
    let scenario = preset("single_type")?;
    let report = run_experiment(&scenario)?;
    println!(
        "{} replications, T = {}",
        scenario.replications, report.horizon
    );
    for row in &report.rows {
        println!(
            "{:<12} avg regret {:>8.3} +- {:.3}",
            row.policy, row.regret.mean, row.regret.stderr
        );
    }
    for d in &report.diagnostics {
        let parts = &d.decomposition;
        println!(
            "{:<12} idiosyncrasy {:>9.1}  delay {:>9.1}  classification {:>9.1}",
            d.policy, parts.idiosyncrasy, parts.delay, parts.classification
        );
    }
    Ok(())
}
