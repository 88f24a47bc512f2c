//! Policies that know every type's cost moments.

use rand::{Rng, RngCore};

use super::{check_positive, maxweight, Policy};
use crate::benchmark::FluidSolution;
use crate::error::{Error, Result};
use crate::model::{Class, EnvConfig, Moments, TypeId};
use crate::sim::{Admission, PostId, SimState};

/// Per-type data shared by the known-moment policies.
#[derive(Clone, Debug)]
struct Known {
    classes: Vec<Class>,
    idiosyncrasy: Vec<f64>,
    lifetimes: Vec<u64>,
    rates: Vec<f64>,
}

impl Known {
    fn new(env: &EnvConfig) -> Result<Self> {
        let moments = env.moments()?;
        Ok(Self {
            classes: moments.iter().map(Moments::best_class).collect(),
            idiosyncrasy: moments.iter().map(|m| m.idiosyncrasy).collect(),
            lifetimes: env.types.iter().map(|p| p.lifetime).collect(),
            rates: env.types.iter().map(|p| p.service_rate).collect(),
        })
    }

    fn class(&self, arrival: Option<TypeId>) -> Class {
        arrival.map_or(Class::Keep, |k| self.classes[k])
    }
}

/// Default admission weight `1 / sqrt(K * l_max)`.
pub fn default_beta(num_types: usize, max_lifetime: u64) -> f64 {
    1.0 / ((num_types as f64) * (max_lifetime as f64)).sqrt()
}

/// Admission weight tuned to a known window size `w`: `sqrt(w / (K * l_max))`.
pub fn window_beta(num_types: usize, max_lifetime: u64, w: u64) -> f64 {
    (w as f64 / ((num_types as f64) * (max_lifetime as f64))).sqrt()
}

/// Balanced admission with MaxWeight scheduling.
#[derive(Clone, Debug)]
pub struct Bacid {
    known: Known,
    beta: f64,
    num_types: usize,
    max_lifetime: u64,
}

impl Bacid {
    pub fn new(env: &EnvConfig) -> Result<Self> {
        Ok(Self {
            known: Known::new(env)?,
            beta: default_beta(env.num_types(), env.max_lifetime()),
            num_types: env.num_types(),
            max_lifetime: env.max_lifetime(),
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = check_positive("beta", beta)?;
        Ok(self)
    }

    pub fn with_window(mut self, w: u64) -> Self {
        self.beta = window_beta(self.num_types, self.max_lifetime, w.max(1));
        self
    }

    /// `beta * r_k * l_k`, the queue length at which type k stops being admitted.
    pub fn admission_level(&self, k: TypeId) -> f64 {
        self.beta * self.known.idiosyncrasy[k] * self.known.lifetimes[k] as f64
    }
}

impl Policy for Bacid {
    fn name(&self) -> &str {
        "bacid"
    }

    fn admit(
        &mut self,
        state: &SimState,
        arrival: Option<TypeId>,
        _: &mut dyn RngCore,
    ) -> Admission {
        let class = self.known.class(arrival);
        let admit = arrival.is_some_and(|k| self.admission_level(k) >= state.queue_len(k) as f64);
        Admission::review(class, admit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        maxweight(state, &self.known.rates)
    }

    fn beta(&self) -> Option<f64> {
        Some(self.beta)
    }
}

/// Never sends anything to review.
#[derive(Clone, Debug)]
pub struct AiOnly {
    known: Known,
}

impl AiOnly {
    pub fn new(env: &EnvConfig) -> Result<Self> {
        Ok(Self {
            known: Known::new(env)?,
        })
    }
}

impl Policy for AiOnly {
    fn name(&self) -> &str {
        "ai-only"
    }

    fn admit(&mut self, _: &SimState, arrival: Option<TypeId>, _: &mut dyn RngCore) -> Admission {
        Admission::classify_only(self.known.class(arrival))
    }

    fn schedule(&mut self, _: &SimState) -> Option<PostId> {
        None
    }
}

/// Admits every post and schedules by MaxWeight.
#[derive(Clone, Debug)]
pub struct HumanOnly {
    known: Known,
}

impl HumanOnly {
    pub fn new(env: &EnvConfig) -> Result<Self> {
        Ok(Self {
            known: Known::new(env)?,
        })
    }
}

impl Policy for HumanOnly {
    fn name(&self) -> &str {
        "human-only"
    }

    fn admit(&mut self, _: &SimState, arrival: Option<TypeId>, _: &mut dyn RngCore) -> Admission {
        Admission::review(self.known.class(arrival), arrival.is_some())
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        maxweight(state, &self.known.rates)
    }
}

/// Admits exactly the posts of one type.
#[derive(Clone, Debug)]
pub struct StaticK {
    known: Known,
    k: TypeId,
    name: String,
}

impl StaticK {
    pub fn new(env: &EnvConfig, k: TypeId) -> Result<Self> {
        if k >= env.num_types() {
            return Err(Error::Config(format!(
                "static type {k} out of range for {} types",
                env.num_types()
            )));
        }
        Ok(Self {
            known: Known::new(env)?,
            k,
            name: format!("static-{}", k + 1),
        })
    }
}

impl Policy for StaticK {
    fn name(&self) -> &str {
        &self.name
    }

    fn admit(&mut self, _: &SimState, arrival: Option<TypeId>, _: &mut dyn RngCore) -> Admission {
        Admission::review(self.known.class(arrival), arrival == Some(self.k))
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        maxweight(state, &self.known.rates)
    }
}

/// Admits a type-k arrival with probability `a*_k(t) / lambda_k(t)` from the
/// 1-fluid solution.
#[derive(Clone, Debug)]
pub struct DynamicFluid {
    known: Known,
    /// `(first period, admission probability per type)`, sorted by period.
    segments: Vec<(u64, Vec<f64>)>,
}

impl DynamicFluid {
    pub fn new(env: &EnvConfig, fluid: Option<&FluidSolution>) -> Result<Self> {
        let fluid =
            fluid.ok_or_else(|| Error::Config("dynamic policy needs a 1-fluid solution".into()))?;
        if fluid.horizon != env.horizon || fluid.num_types() != env.num_types() {
            return Err(Error::Config(
                "fluid solution does not match the environment".into(),
            ));
        }
        Ok(Self {
            known: Known::new(env)?,
            segments: fluid.admission_probability_segments(),
        })
    }

    pub fn probability(&self, k: TypeId, t: u64) -> f64 {
        let idx = self.segments.partition_point(|(from, _)| *from <= t);
        if idx == 0 {
            return 0.0;
        }
        self.segments[idx - 1].1[k]
    }
}

impl Policy for DynamicFluid {
    fn name(&self) -> &str {
        "dynamic"
    }

    fn admit(
        &mut self,
        state: &SimState,
        arrival: Option<TypeId>,
        rng: &mut dyn RngCore,
    ) -> Admission {
        let class = self.known.class(arrival);
        // One policy-stream draw per period keeps the stream aligned.
        let u: f64 = rng.random();
        let admit = arrival.is_some_and(|k| u < self.probability(k, state.t()));
        Admission::review(class, admit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        maxweight(state, &self.known.rates)
    }
}

/// Admits type k while `Q_k < theta`; MaxWeight scheduling.
#[derive(Clone, Debug)]
pub struct Threshold {
    known: Known,
    theta: u64,
}

impl Threshold {
    pub fn new(env: &EnvConfig, theta: u64) -> Result<Self> {
        Ok(Self {
            known: Known::new(env)?,
            theta,
        })
    }
}

impl Policy for Threshold {
    fn name(&self) -> &str {
        "threshold"
    }

    fn admit(
        &mut self,
        state: &SimState,
        arrival: Option<TypeId>,
        _: &mut dyn RngCore,
    ) -> Admission {
        let admit = arrival.is_some_and(|k| (state.queue_len(k) as u64) < self.theta);
        Admission::review(self.known.class(arrival), admit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        maxweight(state, &self.known.rates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostDistribution, Schedule, TypeParams};
    use crate::policy::maxweight_type;
    use crate::sim::{run, Simulation};

    fn env(
        dists: Vec<CostDistribution>,
        rates: Vec<f64>,
        lambdas: Vec<f64>,
        lifetime: u64,
    ) -> EnvConfig {
        EnvConfig {
            horizon: 200,
            arrival_rates: lambdas.into_iter().map(Schedule::constant).collect(),
            capacity: Schedule::constant(1),
            types: dists
                .into_iter()
                .zip(rates)
                .enumerate()
                .map(|(k, (d, mu))| TypeParams::new(k, lifetime, mu, d))
                .collect(),
            r_max: 1.0,
            sigma_max: 1.0,
            feature_bound: 1.0,
        }
    }

    #[test]
    fn zero_mean_keeps() {
        let e = env(
            vec![CostDistribution::signed_unit(0.5)],
            vec![0.5],
            vec![1.0],
            10,
        );
        let k = Known::new(&e).unwrap();
        assert_eq!(k.classes[0], Class::Keep);
    }

    #[test]
    fn admission_tie_admits() {
        // r = 0.5, l = 10, beta = 1 -> level 5.
        let e = env(
            vec![CostDistribution::signed_unit(0.5)],
            vec![0.001],
            vec![1.0],
            10,
        );
        let bacid = Bacid::new(&e).unwrap().with_beta(1.0).unwrap();
        assert_eq!(bacid.admission_level(0), 5.0);
        let mut sim = Simulation::new(&e, Box::new(bacid), 4).unwrap();
        let mut saw_tie = false;
        while !sim.done() {
            let before = sim.state().queue_len(0);
            let rec = sim.step().unwrap();
            if before == 5 {
                saw_tie = true;
                assert!(rec.decision.admit);
            }
            if before == 6 {
                assert!(!rec.decision.admit);
            }
        }
        assert!(saw_tie);
    }

    #[test]
    fn maxweight_prefers_larger_product() {
        let state = SimState::from_queue_lengths(&[2, 11]);
        assert_eq!(maxweight_type(&state, &[0.5, 0.1]), Some(1));
        assert_eq!(maxweight_type(&state, &[0.6, 0.1]), Some(0));
        // Exact tie 2 * 0.5 == 4 * 0.25 goes to the lower index.
        let tie = SimState::from_queue_lengths(&[2, 4]);
        assert_eq!(maxweight_type(&tie, &[0.5, 0.25]), Some(0));
        assert_eq!(
            maxweight_type(&SimState::from_queue_lengths(&[0, 0]), &[0.5, 0.25]),
            None
        );
    }

    #[test]
    fn ai_only_never_admits() {
        let e = env(
            vec![CostDistribution::signed_unit(0.3)],
            vec![0.5],
            vec![0.8],
            10,
        );
        let trace = run(&e, Box::new(AiOnly::new(&e).unwrap()), 3).unwrap();
        assert!(trace
            .periods
            .iter()
            .all(|r| !r.decision.admit && r.decision.schedule.is_none()));
    }

    #[test]
    fn static_admits_only_its_type() {
        let e = env(
            vec![
                CostDistribution::signed_unit(0.5),
                CostDistribution::signed_unit(0.5),
            ],
            vec![0.5, 0.5],
            vec![0.4, 0.4],
            10,
        );
        let trace = run(&e, Box::new(StaticK::new(&e, 1).unwrap()), 3).unwrap();
        for rec in &trace.periods {
            assert_eq!(rec.decision.admit, rec.arrival == Some(1));
        }
        assert!(StaticK::new(&e, 2).is_err());
    }

    #[test]
    fn dynamic_requires_fluid() {
        let e = env(
            vec![CostDistribution::signed_unit(0.5)],
            vec![0.5],
            vec![1.0],
            10,
        );
        assert!(matches!(DynamicFluid::new(&e, None), Err(Error::Config(_))));
    }

    #[test]
    fn dynamic_with_full_mass_admits_everything() {
        // Capacity covers all arrivals, so a*_k(t) = lambda_k(t).
        let e = env(
            vec![CostDistribution::signed_unit(0.5)],
            vec![1.0],
            vec![0.7],
            10,
        );
        let fluid = crate::benchmark::solve_w_fluid(&e, 1).unwrap();
        let dynamic = DynamicFluid::new(&e, Some(&fluid)).unwrap();
        assert_eq!(dynamic.probability(0, 5), 1.0);
        let trace = run(&e, Box::new(dynamic.clone()), 8).unwrap();
        assert!(trace.posts.iter().all(|p| p.admitted()));
        let _ = dynamic.name();
    }

    #[test]
    fn beta_defaults() {
        assert!((default_beta(2, 50) - 0.1).abs() < 1e-15);
        assert!((window_beta(2, 50, 4) - 0.2).abs() < 1e-15);
    }
}
