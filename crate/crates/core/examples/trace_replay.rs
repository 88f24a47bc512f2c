//! Record a run as JSONL, read it back and check it against a fresh run.
//!
//! cargo run --release --example trace_replay

use std::io::BufReader;

use moderation_pipeline::harness::scenario::duty_cycle;
use moderation_pipeline::sim::{littles_law_sides, loss_decomposition};
use moderation_pipeline::{realized_loss, run_spec, PolicyKind, PolicySpec, Trace};

fn main() -> moderation_pipeline::Result<()> {
    let env = duty_cycle(100, 2_000, 500, 400)?;
    let spec = PolicySpec::named(PolicyKind::Bacid);
    let trace = run_spec(&env, &spec, 42)?;

    let mut bytes = Vec::new();
    trace.write_jsonl(&mut bytes)?;
    println!(
        "{} posts, {} bytes of JSONL",
        trace.posts.len(),
        bytes.len()
    );

    let back = Trace::read_jsonl(BufReader::new(bytes.as_slice()))?;
    assert_eq!(back, trace);
    assert_eq!(run_spec(&env, &spec, 42)?, back);

    let parts = loss_decomposition(&back)?;
    let (by_posts, by_periods) = littles_law_sides(&back);
    println!("realized loss {:.2}", realized_loss(&back));
    println!(
        "idiosyncrasy {:.2}, delay {:.2}, classification {:.2}",
        parts.idiosyncrasy, parts.delay, parts.classification
    );
    println!("time in system: {by_posts} post-periods = {by_periods} queue-periods");
    Ok(())
}
