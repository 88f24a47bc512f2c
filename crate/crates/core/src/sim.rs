//! Period-by-period execution of the moderation pipeline.
//!
//! Each period runs, in order: arrival draw, cost draw (if a post arrived),
//! service draw, classification and admission by the policy, enqueueing,
//! scheduling by the policy, and a Bernoulli review with success
//! probability `N(t) * mu_k`. A completed review reveals the cost, moves the
//! post into the dataset and reverses its classification if it was wrong.
//!
//! The three environment draws are taken every period whether or not they
//! are used, so the realizations depend only on the seed.

use std::collections::VecDeque;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_cost, Class, EnvConfig, TypeId};
use crate::policy::{Policy, PolicySpec};
use crate::rng::RunStreams;

pub type PostId = usize;

/// Which queue (if any) a post entered on arrival.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    NotAdmitted,
    Review,
    LabelDriven,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: PostId,
    pub type_id: TypeId,
    pub arrival_period: u64,
    pub cost: f64,
    pub initial_class: Class,
    pub route: Route,
    pub review_completion_period: Option<u64>,
}

impl Post {
    /// Periods until the label is known: `completion - arrival + 1`, or
    /// `T + 1 - arrival` when never reviewed.
    pub fn delay(&self, horizon: u64) -> u64 {
        match self.review_completion_period {
            Some(done) => done - self.arrival_period + 1,
            None => horizon + 1 - self.arrival_period,
        }
    }

    pub fn admitted(&self) -> bool {
        self.route != Route::NotAdmitted
    }

    pub fn misclassified(&self) -> bool {
        self.initial_class != Class::clairvoyant(self.cost)
    }
}

/// Classification and admission for the arriving post.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Admission {
    pub class: Class,
    pub admit: bool,
    pub label_driven: bool,
}

impl Admission {
    pub fn classify_only(class: Class) -> Self {
        Self {
            class,
            admit: false,
            label_driven: false,
        }
    }

    pub fn review(class: Class, admit: bool) -> Self {
        Self {
            class,
            admit,
            label_driven: false,
        }
    }

    pub fn label_driven(class: Class) -> Self {
        Self {
            class,
            admit: false,
            label_driven: true,
        }
    }
}

/// One period's `(Y, A, E, M)` as executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub class: Option<Class>,
    pub admit: bool,
    pub label_driven: bool,
    pub schedule: Option<PostId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub post_id: PostId,
    pub type_id: TypeId,
    pub cost: f64,
    pub period: u64,
}

/// Queueing state at the current period.
#[derive(Clone, Debug)]
pub struct SimState {
    t: u64,
    posts: Vec<Post>,
    queues: Vec<VecDeque<PostId>>,
    label_driven: Option<PostId>,
    dataset: Vec<Review>,
    reviewed: Vec<u64>,
    admitted: Vec<u64>,
}

impl SimState {
    pub fn new(num_types: usize) -> Self {
        Self {
            t: 1,
            posts: Vec::new(),
            queues: vec![VecDeque::new(); num_types],
            label_driven: None,
            dataset: Vec::new(),
            reviewed: vec![0; num_types],
            admitted: vec![0; num_types],
        }
    }

    /// State at period 1 with `lens[k]` zero-cost type-k posts waiting in
    /// the review queue (for exercising policies in isolation).
    pub fn from_queue_lengths(lens: &[usize]) -> Self {
        let mut state = Self::new(lens.len());
        for (k, &len) in lens.iter().enumerate() {
            for _ in 0..len {
                let id = state.posts.len();
                state.posts.push(Post {
                    post_id: id,
                    type_id: k,
                    arrival_period: 1,
                    cost: 0.0,
                    initial_class: Class::Keep,
                    route: Route::Review,
                    review_completion_period: None,
                });
                state.queues[k].push_back(id);
                state.admitted[k] += 1;
            }
        }
        state
    }

    /// Current period (1-based).
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn num_types(&self) -> usize {
        self.queues.len()
    }

    /// Length of the review queue for type `k` (label-driven queue excluded).
    pub fn queue_len(&self, k: TypeId) -> usize {
        self.queues[k].len()
    }

    pub fn queue_lens(&self) -> impl Iterator<Item = usize> + '_ {
        self.queues.iter().map(VecDeque::len)
    }

    pub fn review_queue_len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn head(&self, k: TypeId) -> Option<PostId> {
        self.queues[k].front().copied()
    }

    pub fn queue(&self, k: TypeId) -> &VecDeque<PostId> {
        &self.queues[k]
    }

    pub fn label_driven(&self) -> Option<PostId> {
        self.label_driven
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn post(&self, id: PostId) -> &Post {
        &self.posts[id]
    }

    pub fn dataset(&self) -> &[Review] {
        &self.dataset
    }

    /// `n_k(t)`: reviewed posts of type `k`.
    pub fn reviewed(&self, k: TypeId) -> u64 {
        self.reviewed[k]
    }

    /// Posts of type `k` admitted to either queue so far.
    pub fn admitted(&self, k: TypeId) -> u64 {
        self.admitted[k]
    }

    fn is_queued(&self, id: PostId) -> bool {
        if self.label_driven == Some(id) {
            return true;
        }
        let Some(post) = self.posts.get(id) else {
            return false;
        };
        post.route == Route::Review
            && post.review_completion_period.is_none()
            && self.queues[post.type_id].contains(&id)
    }

    fn remove_queued(&mut self, id: PostId) {
        if self.label_driven == Some(id) {
            self.label_driven = None;
            return;
        }
        let k = self.posts[id].type_id;
        let queue = &mut self.queues[k];
        if queue.front() == Some(&id) {
            queue.pop_front();
        } else if let Some(pos) = queue.iter().position(|&p| p == id) {
            queue.remove(pos);
        }
    }
}

/// Everything observable about one executed period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: u64,
    pub arrival: Option<TypeId>,
    pub post: Option<PostId>,
    pub decision: Decision,
    /// Post whose review completed this period (`S(t)`).
    pub served: Option<PostId>,
    /// Review-queue length per type after admission, before service.
    pub queue: Vec<u32>,
    pub label_driven: u32,
    /// Uniform drawn for the review outcome (kept for pairing checks).
    pub service_draw: f64,
}

impl PeriodRecord {
    pub fn in_system(&self) -> u64 {
        self.queue.iter().map(|&q| u64::from(q)).sum::<u64>() + u64::from(self.label_driven)
    }
}

/// Complete, replayable history of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub env: EnvConfig,
    pub seed: u64,
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_spec: Option<PolicySpec>,
    pub periods: Vec<PeriodRecord>,
    pub posts: Vec<Post>,
}

impl Trace {
    pub fn horizon(&self) -> u64 {
        self.env.horizon
    }

    pub fn delay(&self, post: &Post) -> u64 {
        post.delay(self.env.horizon)
    }

    pub fn reviewed_count(&self, k: TypeId) -> usize {
        self.posts
            .iter()
            .filter(|p| p.type_id == k && p.review_completion_period.is_some())
            .count()
    }

    /// Hash of the environment realization (arrivals, costs, service draws).
    /// Equal for any two policies run on the same env and seed.
    pub fn env_fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for rec in &self.periods {
            rec.arrival.hash(&mut h);
            rec.service_draw.to_bits().hash(&mut h);
        }
        for post in &self.posts {
            post.type_id.hash(&mut h);
            post.cost.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = TraceLine::Header {
            env: self.env.clone(),
            seed: self.seed,
            policy: self.policy.clone(),
            policy_spec: self.policy_spec.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for rec in &self.periods {
            serde_json::to_writer(&mut out, &TraceLineRef::Period(rec))?;
            out.write_all(b"\n")?;
        }
        for post in &self.posts {
            serde_json::to_writer(&mut out, &TraceLineRef::Post(post))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Trace> {
        let mut header = None;
        let mut periods = Vec::new();
        let mut posts = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TraceLine>(&line)? {
                TraceLine::Header {
                    env,
                    seed,
                    policy,
                    policy_spec,
                } => header = Some((env, seed, policy, policy_spec)),
                TraceLine::Period(rec) => periods.push(rec),
                TraceLine::Post(post) => posts.push(post),
            }
        }
        let (env, seed, policy, policy_spec) =
            header.ok_or_else(|| Error::Config("trace file has no header line".into()))?;
        Ok(Trace {
            env,
            seed,
            policy,
            policy_spec,
            periods,
            posts,
        })
    }
}

// The header is written once per file, so its size does not matter.
#[allow(clippy::large_enum_variant)]
#[derive(Deserialize, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceLine {
    Header {
        env: EnvConfig,
        seed: u64,
        policy: String,
        #[serde(default)]
        policy_spec: Option<PolicySpec>,
    },
    Period(PeriodRecord),
    Post(Post),
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceLineRef<'a> {
    Period(&'a PeriodRecord),
    Post(&'a Post),
}

/// A run in progress. `step` advances one period; `finish` yields the trace.
pub struct Simulation<'a, P: Policy + ?Sized> {
    env: &'a EnvConfig,
    seed: u64,
    state: SimState,
    streams: RunStreams,
    records: Option<Vec<PeriodRecord>>,
    policy: Box<P>,
}

impl<'a, P: Policy + ?Sized> Simulation<'a, P> {
    pub fn new(env: &'a EnvConfig, policy: Box<P>, seed: u64) -> Result<Self> {
        env.validate()?;
        Ok(Self {
            env,
            seed,
            state: SimState::new(env.num_types()),
            streams: RunStreams::new(seed),
            records: Some(Vec::with_capacity(env.horizon as usize)),
            policy,
        })
    }

    /// Do not keep per-period records (for very long runs that only need
    /// streaming statistics).
    pub fn without_records(mut self) -> Self {
        self.records = None;
        self
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn env(&self) -> &EnvConfig {
        self.env
    }

    pub fn done(&self) -> bool {
        self.state.t > self.env.horizon
    }

    pub fn step(&mut self) -> Result<PeriodRecord> {
        let t = self.state.t;
        if t > self.env.horizon {
            return Err(Error::Contract {
                period: t,
                message: "stepped past the horizon".into(),
            });
        }
        let env = self.env;

        let u_arrival: f64 = self.streams.arrival.random();
        let mut arrival = None;
        let mut cumulative = 0.0;
        for k in 0..env.num_types() {
            cumulative += env.arrival_rate(k, t);
            if u_arrival < cumulative {
                arrival = Some(k);
                break;
            }
        }
        let cost = arrival.map(|k| sample_cost(&env.types[k].dist, &mut self.streams.cost));
        let service_draw: f64 = self.streams.service.random();

        let admission = self
            .policy
            .admit(&self.state, arrival, &mut self.streams.policy);
        let mut decision = Decision::default();
        let mut post_id = None;
        match (arrival, cost) {
            (Some(k), Some(cost)) => {
                if admission.admit && admission.label_driven {
                    return Err(contract(t, "post admitted to both queues"));
                }
                if admission.label_driven && self.state.label_driven.is_some() {
                    return Err(contract(t, "label-driven queue already occupied"));
                }
                let id = self.state.posts.len();
                let route = if admission.label_driven {
                    Route::LabelDriven
                } else if admission.admit {
                    Route::Review
                } else {
                    Route::NotAdmitted
                };
                self.state.posts.push(Post {
                    post_id: id,
                    type_id: k,
                    arrival_period: t,
                    cost,
                    initial_class: admission.class,
                    route,
                    review_completion_period: None,
                });
                match route {
                    Route::Review => {
                        self.state.queues[k].push_back(id);
                        self.state.admitted[k] += 1;
                    }
                    Route::LabelDriven => {
                        self.state.label_driven = Some(id);
                        self.state.admitted[k] += 1;
                    }
                    Route::NotAdmitted => {}
                }
                decision.class = Some(admission.class);
                decision.admit = admission.admit;
                decision.label_driven = admission.label_driven;
                post_id = Some(id);
            }
            _ => {
                if admission.admit || admission.label_driven {
                    return Err(contract(t, "admission without an arrival"));
                }
            }
        }

        let queue: Vec<u32> = self.state.queues.iter().map(|q| q.len() as u32).collect();
        let label_driven = u32::from(self.state.label_driven.is_some());

        let scheduled = self.policy.schedule(&self.state);
        decision.schedule = scheduled;
        let mut served = None;
        if let Some(id) = scheduled {
            if !self.state.is_queued(id) {
                return Err(contract(
                    t,
                    &format!("scheduled post {id} is not waiting for review"),
                ));
            }
            let k = self.state.posts[id].type_id;
            let p_done = f64::from(env.capacity_at(t)) * env.types[k].service_rate;
            if service_draw < p_done {
                self.state.remove_queued(id);
                let post = &mut self.state.posts[id];
                post.review_completion_period = Some(t);
                let review = Review {
                    post_id: id,
                    type_id: k,
                    cost: post.cost,
                    period: t,
                };
                self.state.dataset.push(review);
                self.state.reviewed[k] += 1;
                served = Some(id);
                self.policy.on_review(&review);
            }
        }

        let record = PeriodRecord {
            t,
            arrival,
            post: post_id,
            decision,
            served,
            queue,
            label_driven,
            service_draw,
        };
        if let Some(records) = self.records.as_mut() {
            records.push(record.clone());
        }
        self.state.t += 1;
        Ok(record)
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> Trace {
        Trace {
            env: self.env.clone(),
            seed: self.seed,
            policy: self.policy.name().to_string(),
            policy_spec: None,
            periods: self.records.unwrap_or_default(),
            posts: self.state.posts,
        }
    }

    pub fn into_parts(self) -> (Trace, Box<P>) {
        let policy = self.policy;
        let trace = Trace {
            env: self.env.clone(),
            seed: self.seed,
            policy: policy.name().to_string(),
            policy_spec: None,
            periods: self.records.unwrap_or_default(),
            posts: self.state.posts,
        };
        (trace, policy)
    }
}

fn contract(period: u64, message: &str) -> Error {
    Error::Contract {
        period,
        message: message.to_string(),
    }
}

/// Run `policy` for the full horizon of `env`.
pub fn run<P: Policy + ?Sized>(env: &EnvConfig, policy: Box<P>, seed: u64) -> Result<Trace> {
    let mut sim = Simulation::new(env, policy, seed)?;
    sim.run_to_end()?;
    Ok(sim.finish())
}

/// Build the policy described by `spec` and run it; the trace remembers the
/// spec so it can be replayed.
pub fn run_spec(env: &EnvConfig, spec: &PolicySpec, seed: u64) -> Result<Trace> {
    let policy = spec.build(env)?;
    let mut trace = run(env, policy, seed)?;
    trace.policy_spec = Some(spec.clone());
    Ok(trace)
}

/// Loss against the clairvoyant that keeps exactly the posts with `c <= 0`.
///
/// A correctly classified post never diverges. A misclassified post that was
/// never admitted is charged `|c|` for its whole lifetime, matching the
/// benchmark, which charges every non-admitted post `r_k * l_k`. An admitted
/// one diverges for `min(D, lifetime)` periods, where `D = T + 1 - arrival`
/// when the review has not completed by the horizon.
pub fn realized_loss(trace: &Trace) -> f64 {
    realized_loss_until(trace, trace.env.horizon)
}

/// Same loss over the posts that arrived by `until <= T`, with delays cut
/// at `until`.
pub fn realized_loss_until(trace: &Trace, until: u64) -> f64 {
    let until = until.min(trace.env.horizon);
    trace
        .posts
        .iter()
        .filter(|p| p.arrival_period <= until && p.misclassified())
        .map(|p| {
            let lifetime = trace.env.types[p.type_id].lifetime;
            let periods = if p.admitted() {
                match p.review_completion_period {
                    Some(done) if done <= until => done - p.arrival_period + 1,
                    _ => until + 1 - p.arrival_period,
                }
                .min(lifetime)
            } else {
                lifetime
            };
            p.cost.abs() * periods as f64
        })
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossDecomposition {
    pub idiosyncrasy: f64,
    pub delay: f64,
    pub classification: f64,
}

/// Realized idiosyncrasy, delay and classification components using the
/// true type moments. Diagnostic only.
pub fn loss_decomposition(trace: &Trace) -> Result<LossDecomposition> {
    let moments = trace.env.moments()?;
    let mut out = LossDecomposition::default();
    for post in &trace.posts {
        let m = &moments[post.type_id];
        let lifetime = trace.env.types[post.type_id].lifetime as f64;
        if post.admitted() {
            let d = trace
                .delay(post)
                .min(trace.env.types[post.type_id].lifetime);
            out.delay += m.idiosyncrasy * d as f64;
        } else {
            out.idiosyncrasy += m.idiosyncrasy * lifetime;
            let excess = m.class_cost(post.initial_class) - m.idiosyncrasy;
            out.classification += excess * lifetime;
        }
    }
    Ok(out)
}

/// Both sides of the discrete Little's law identity: total admitted-post
/// time in system versus the per-period sum of queue snapshots.
pub fn littles_law_sides(trace: &Trace) -> (u64, u64) {
    let horizon = trace.env.horizon;
    let by_posts = trace
        .posts
        .iter()
        .filter(|p| p.admitted())
        .map(|p| p.delay(horizon).min(horizon + 1 - p.arrival_period))
        .sum();
    let by_periods = trace.periods.iter().map(PeriodRecord::in_system).sum();
    (by_posts, by_periods)
}
