//! Simulation, policies and regret benchmarks for human-AI content
//! moderation queues.
//!
//! Posts of finitely many types arrive one per period at most. A policy
//! classifies each post (keep or remove), decides whether to admit it for
//! human review, and schedules reviewers. Reviews take geometric time, reveal
//! the post's cost, and feed learning policies. Losses are compared with the
//! w-fluid benchmark to obtain average regret.

pub mod benchmark;
pub mod error;
pub mod harness;
pub mod model;
pub mod policy;
pub mod rng;
pub mod sim;

pub use benchmark::{average_regret, solve_w_fluid, FluidSolution};
pub use error::{Error, Result};
pub use model::{Class, CostDistribution, EnvConfig, Moments, Schedule, TypeParams};
pub use policy::{Policy, PolicyKind, PolicyParams, PolicySpec};
pub use sim::{realized_loss, run, run_spec, Simulation, Trace};
