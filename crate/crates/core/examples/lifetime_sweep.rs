//! Average regret as a function of lifetime under a time-varying capacity
//! duty cycle. Reduced horizon and replications so it runs in seconds.
//!
//! cargo run --release --example lifetime_sweep

use moderation_pipeline::harness::{preset, sweep};

fn main() -> moderation_pipeline::Result<()> {
    let mut scenario = preset("duty_cycle")?;
    scenario.replications = 4;
    let scenario = scenario.with_param("horizon", 10_000.0)?;
    let lifetimes = [50.0, 100.0, 200.0, 400.0];
    let report = sweep(&scenario, "lifetime", &lifetimes)?;

    print!("{:<12}", "policy");
    for l in lifetimes {
        print!("{:>9}", format!("l={l}"));
    }
    println!();
    for policy in report.policies() {
        print!("{policy:<12}");
        for l in lifetimes {
            let row = report.row(&policy, 1, Some(l)).expect("row per point");
            print!("{:>9.3}", row.regret.mean);
        }
        println!();
    }
    Ok(())
}
