//! Type-aggregated scheduling with ridge-regression bounds.
//!
//! cargo run --release --example contextual

use moderation_pipeline::harness::{preset, run_experiment};
use moderation_pipeline::policy::{PolicyKind, PolicyParams, PolicySpec};

fn main() -> moderation_pipeline::Result<()> {
    let scenario = preset("contextual")?;
    let env = scenario.validate()?;

    for zeta in [0.25, 1.0] {
        let spec = PolicySpec::with_params(
            PolicyKind::Colbacid,
            PolicyParams {
                zeta: Some(zeta),
                ..Default::default()
            },
        );
        let policy = spec.build(&env)?;
        let groups = policy.groups().expect("colbacid has groups");
        println!("zeta = {zeta}: type -> group {:?}", groups.group_of);
    }

    let report = run_experiment(&scenario)?;
    for row in report.rows.iter().filter(|r| r.w == 1) {
        println!(
            "{:<20} avg regret {:>7.3} +- {:.3}",
            row.policy, row.regret.mean, row.regret.stderr
        );
    }
    Ok(())
}
