//! Optimism alone versus label-driven admission when a rare, short-lived type
//! appears after a long warm-up.
//!
//! cargo run --release --example label_driven

use moderation_pipeline::harness::{preset, run_experiment, sweep};

fn main() -> moderation_pipeline::Result<()> {
    let scenario = preset("rare_video")?;
    let report = run_experiment(&scenario)?;
    for d in &report.diagnostics {
        println!(
            "{:<10} reviewed {:>8.1} texts {:>6.1} videos; no video reviewed in {:>3.0}% of seeds",
            d.policy,
            d.mean_reviewed[0],
            d.mean_reviewed[1],
            100.0 * d.zero_review_share[1]
        );
    }
    for gap in &report.gaps {
        println!(
            "{}: {:.3} +- {:.3}, nonnegative in {:.0}% of seeds",
            gap.label,
            gap.gap.mean,
            gap.gap.stderr,
            100.0 * gap.share_nonnegative
        );
    }

    let mut quick = scenario.clone();
    quick.replications = 5;
    let report = sweep(&quick, "ratio", &[0.01, 0.03, 0.1, 0.3, 1.0])?;
    println!();
    println!("lifetime ratio vs paired regret gap");
    for gap in &report.gaps {
        println!("{:>6} {:>9.3}", gap.x.unwrap_or_default(), gap.gap.mean);
    }
    Ok(())
}
