//! Plugging a hand-written policy into the simulator: admit while the
//! review queue is short, review the oldest post first.
//!
//! cargo run --release --example custom_policy

use moderation_pipeline::harness::scenario::duty_cycle;
use moderation_pipeline::model::TypeId;
use moderation_pipeline::policy::Bacid;
use moderation_pipeline::sim::{Admission, PostId, SimState};
use moderation_pipeline::{realized_loss, run, Class, Policy};
use rand::RngCore;

struct ShortQueue {
    limit: usize,
    keep: Vec<bool>,
}

impl Policy for ShortQueue {
    fn name(&self) -> &str {
        "short-queue"
    }

    fn admit(
        &mut self,
        state: &SimState,
        arrival: Option<TypeId>,
        _: &mut dyn RngCore,
    ) -> Admission {
        let Some(k) = arrival else {
            return Admission::classify_only(Class::Keep);
        };
        let class = if self.keep[k] {
            Class::Keep
        } else {
            Class::Remove
        };
        Admission::review(class, state.review_queue_len() < self.limit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        (0..state.num_types()).filter_map(|k| state.head(k)).min()
    }
}

fn main() -> moderation_pipeline::Result<()> {
    let env = duty_cycle(100, 20_000, 500, 400)?;
    let keep = env
        .moments()?
        .iter()
        .map(|m| m.mean <= 0.0)
        .collect::<Vec<_>>();
    for limit in [5, 20, 80] {
        let trace = run(
            &env,
            Box::new(ShortQueue {
                limit,
                keep: keep.clone(),
            }),
            1,
        )?;
        println!(
            "short-queue({limit:>2}) loss / T = {:.3}",
            realized_loss(&trace) / env.horizon as f64
        );
    }
    let trace = run(&env, Box::new(Bacid::new(&env)?), 1)?;
    println!(
        "bacid            loss / T = {:.3}",
        realized_loss(&trace) / env.horizon as f64
    );
    Ok(())
}
