//! Finite-type learning: sample averages, confidence bounds, and the
//! optimism-only and label-driven admission policies.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::known::default_beta;
use super::{check_positive, maxweight, Policy};
use crate::error::{Error, Result};
use crate::model::{Class, EnvConfig, Moments, TypeId};
use crate::sim::{Admission, PostId, Review, SimState};

/// Running sums over the reviewed posts of one type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub n: u64,
    pub sum_pos: f64,
    pub sum_neg: f64,
}

impl TypeStats {
    pub fn push(&mut self, cost: f64) {
        self.n += 1;
        self.sum_pos += cost.max(0.0);
        self.sum_neg += (-cost).max(0.0);
    }

    /// Estimate of `E[c+]`, zero without data.
    pub fn keep_cost(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum_pos / self.n as f64
        }
    }

    /// Estimate of `E[-c-]`, zero without data.
    pub fn remove_cost(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum_neg / self.n as f64
        }
    }

    pub fn h_hat(&self) -> f64 {
        self.keep_cost() - self.remove_cost()
    }

    pub fn class(&self) -> Class {
        Class::from_mean_estimate(self.h_hat())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfBounds {
    pub h_lo: f64,
    pub h_hi: f64,
    pub r_bar: f64,
}

impl ConfBounds {
    /// Bounds carrying no information.
    pub fn vacuous(r_max: f64) -> Self {
        Self {
            h_lo: -r_max,
            h_hi: r_max,
            r_bar: r_max,
        }
    }

    pub fn covers(&self, m: &Moments) -> bool {
        self.h_lo <= m.mean && m.mean <= self.h_hi && m.idiosyncrasy <= self.r_bar
    }

    /// The interval straddles `[-gamma, gamma]` strictly on both sides.
    pub fn uncertain(&self, gamma: f64) -> bool {
        self.h_lo < -gamma && gamma < self.h_hi
    }
}

/// Sample-average confidence bounds at period `t`.
///
/// `h` gets half-width `sigma * sqrt(8 ln t / n)`; `r` gets the upper bound
/// `min(r_hat_O, r_hat_R) + 4 sigma sqrt(ln t / n)`. With `n = 0` the widths
/// are infinite.
pub fn conf_bounds(stats: &TypeStats, t: u64, sigma_max: f64, r_max: f64) -> ConfBounds {
    if stats.n == 0 {
        return ConfBounds::vacuous(r_max);
    }
    let n = stats.n as f64;
    let log_t = (t.max(1) as f64).ln();
    let h_hat = stats.h_hat();
    let width_h = sigma_max * (8.0 * log_t / n).sqrt();
    let r_hat = stats.keep_cost().min(stats.remove_cost());
    ConfBounds {
        h_lo: (h_hat - width_h).max(-r_max),
        h_hi: (h_hat + width_h).min(r_max),
        r_bar: (r_hat + 4.0 * sigma_max * (log_t / n).sqrt()).min(r_max),
    }
}

#[derive(Clone, Debug)]
struct Learner {
    stats: Vec<TypeStats>,
    lifetimes: Vec<u64>,
    rates: Vec<f64>,
    sigma_max: f64,
    r_max: f64,
    beta: f64,
}

impl Learner {
    fn new(env: &EnvConfig) -> Self {
        Self {
            stats: vec![TypeStats::default(); env.num_types()],
            lifetimes: env.types.iter().map(|p| p.lifetime).collect(),
            rates: env.types.iter().map(|p| p.service_rate).collect(),
            sigma_max: env.sigma_max,
            r_max: env.r_max,
            beta: default_beta(env.num_types(), env.max_lifetime()),
        }
    }

    fn configure(
        &mut self,
        beta: Option<f64>,
        sigma_max: Option<f64>,
        r_max: Option<f64>,
    ) -> Result<()> {
        if let Some(beta) = beta {
            self.beta = check_positive("beta", beta)?;
        }
        if let Some(sigma) = sigma_max {
            self.sigma_max = check_positive("sigma_max", sigma)?;
        }
        if let Some(r) = r_max {
            self.r_max = check_positive("r_max", r)?;
        }
        Ok(())
    }

    fn bounds(&self, k: TypeId, t: u64) -> ConfBounds {
        conf_bounds(&self.stats[k], t, self.sigma_max, self.r_max)
    }

    fn optimistic_admit(&self, k: TypeId, r_bar: f64, queue_len: usize) -> bool {
        self.beta * r_bar * self.lifetimes[k] as f64 >= queue_len as f64
    }
}

/// Optimistic admission with UCB estimates and no label-driven queue.
#[derive(Clone, Debug)]
pub struct BacidUcb {
    learner: Learner,
    known: Vec<Option<Moments>>,
}

impl BacidUcb {
    pub fn new(env: &EnvConfig) -> Result<Self> {
        Ok(Self {
            learner: Learner::new(env),
            known: vec![None; env.num_types()],
        })
    }

    pub fn configure(
        &mut self,
        beta: Option<f64>,
        sigma_max: Option<f64>,
        r_max: Option<f64>,
    ) -> Result<()> {
        self.learner.configure(beta, sigma_max, r_max)
    }

    /// Give the policy the true moments of type `k`; it then uses them
    /// instead of estimates for that type.
    pub fn know_type(&mut self, env: &EnvConfig, k: TypeId) -> Result<()> {
        let moments = env
            .moments()?
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("known type {k} out of range")))?;
        self.known[k] = Some(moments);
        Ok(())
    }

    pub fn stats(&self, k: TypeId) -> &TypeStats {
        &self.learner.stats[k]
    }
}

impl Policy for BacidUcb {
    fn name(&self) -> &str {
        "bacid-ucb"
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
        let (class, r_bar) = match &self.known[k] {
            Some(m) => (m.best_class(), m.idiosyncrasy),
            None => (
                self.learner.stats[k].class(),
                self.learner.bounds(k, state.t()).r_bar,
            ),
        };
        let admit = self.learner.optimistic_admit(k, r_bar, state.queue_len(k));
        Admission::review(class, admit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        maxweight(state, &self.learner.rates)
    }

    fn on_review(&mut self, review: &Review) {
        self.learner.stats[review.type_id].push(review.cost);
    }

    fn confidence(&self, k: TypeId, t: u64) -> Option<ConfBounds> {
        Some(match &self.known[k] {
            Some(m) => ConfBounds {
                h_lo: m.mean,
                h_hi: m.mean,
                r_bar: m.idiosyncrasy,
            },
            None => self.learner.bounds(k, t),
        })
    }

    fn beta(&self) -> Option<f64> {
        Some(self.learner.beta)
    }
}

/// Label-driven and optimistic admission with forced scheduling of the
/// label-driven queue.
#[derive(Clone, Debug)]
pub struct Olbacid {
    learner: Learner,
    gamma: f64,
}

impl Olbacid {
    pub fn new(env: &EnvConfig) -> Result<Self> {
        let learner = Learner::new(env);
        Ok(Self {
            gamma: learner.beta,
            learner,
        })
    }

    pub fn configure(
        &mut self,
        beta: Option<f64>,
        gamma: Option<f64>,
        sigma_max: Option<f64>,
        r_max: Option<f64>,
    ) -> Result<()> {
        self.learner.configure(beta, sigma_max, r_max)?;
        if let Some(gamma) = gamma {
            self.gamma = check_positive("gamma", gamma)?;
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn stats(&self, k: TypeId) -> &TypeStats {
        &self.learner.stats[k]
    }
}

impl Policy for Olbacid {
    fn name(&self) -> &str {
        "olbacid"
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
        let class = self.learner.stats[k].class();
        let bounds = self.learner.bounds(k, state.t());
        if bounds.uncertain(self.gamma) && state.label_driven().is_none() {
            return Admission::label_driven(class);
        }
        let admit = self
            .learner
            .optimistic_admit(k, bounds.r_bar, state.queue_len(k));
        Admission::review(class, admit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        state
            .label_driven()
            .or_else(|| maxweight(state, &self.learner.rates))
    }

    fn on_review(&mut self, review: &Review) {
        self.learner.stats[review.type_id].push(review.cost);
    }

    fn confidence(&self, k: TypeId, t: u64) -> Option<ConfBounds> {
        Some(self.learner.bounds(k, t))
    }

    fn beta(&self) -> Option<f64> {
        Some(self.learner.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostDistribution, Schedule, TypeParams};

    fn stats_with(n: u64, keep: f64, remove: f64) -> TypeStats {
        TypeStats {
            n,
            sum_pos: keep * n as f64,
            sum_neg: remove * n as f64,
        }
    }

    #[test]
    fn empty_stats_give_vacuous_bounds() {
        let b = conf_bounds(&TypeStats::default(), 50, 1.0, 1.0);
        assert_eq!(b, ConfBounds::vacuous(1.0));
        assert_eq!(TypeStats::default().class(), Class::Keep);
    }

    #[test]
    fn bounds_hand_example() {
        // n = 8, ln t = 4, sigma = 1, h_hat = 0.3 with min(r_hat) = 0.2.
        let stats = stats_with(8, 0.5, 0.2);
        let t = 4f64.exp().round() as u64;
        let b = conf_bounds(&stats, t, 1.0, 1.0);
        let log_t = (t as f64).ln();
        let width = (8.0 * log_t / 8.0).sqrt();
        assert!((b.h_lo - (0.3 - width).max(-1.0)).abs() < 1e-12);
        assert_eq!(b.h_hi, 1.0);
        assert_eq!(b.r_bar, 1.0);
        assert_eq!(b.h_lo, -1.0);
    }

    #[test]
    fn bounds_collapse_with_data() {
        let stats = stats_with(1_000_000_000, 0.7, 0.2);
        let b = conf_bounds(&stats, 10, 1.0, 1.0);
        assert!((b.h_lo - 0.5).abs() < 1e-3 && (b.h_hi - 0.5).abs() < 1e-3);
        assert!((b.r_bar - 0.2).abs() < 1e-3);
    }

    #[test]
    fn push_splits_signs() {
        let mut s = TypeStats::default();
        s.push(2.0);
        s.push(-1.0);
        assert_eq!(s.keep_cost(), 1.0);
        assert_eq!(s.remove_cost(), 0.5);
        assert_eq!(s.h_hat(), 0.5);
    }

    #[test]
    fn strict_label_driven_boundary() {
        let b = ConfBounds {
            h_lo: -0.1,
            h_hi: 0.5,
            r_bar: 1.0,
        };
        assert!(!b.uncertain(0.1));
        assert!(b.uncertain(0.099));
    }

    fn two_type_env() -> EnvConfig {
        EnvConfig {
            horizon: 50,
            arrival_rates: vec![Schedule::constant(0.5), Schedule::constant(0.5)],
            capacity: Schedule::constant(1),
            types: vec![
                TypeParams::new(0, 100, 0.5, CostDistribution::signed_unit(0.5)),
                TypeParams::new(1, 100, 0.5, CostDistribution::signed_unit(0.2)),
            ],
            r_max: 1.0,
            sigma_max: 1.0,
            feature_bound: 1.0,
        }
    }

    #[test]
    fn olbacid_skips_label_driven_when_occupied() {
        let env = two_type_env();
        let mut ol = Olbacid::new(&env).unwrap();
        let mut rng = crate::rng::stream(0, crate::rng::Stream::Policy);
        let state = SimState::new(2);
        let first = ol.admit(&state, Some(0), &mut rng);
        assert!(first.label_driven && !first.admit);

        let mut sim = crate::sim::Simulation::new(&env, Box::new(ol.clone()), 1).unwrap();
        while sim.state().label_driven().is_none() {
            sim.step().unwrap();
        }
        let next = ol.admit(sim.state(), Some(1), &mut rng);
        assert!(!next.label_driven);
        // No data: r_bar = r_max, so admitted while beta * l >= Q.
        assert!(next.admit);
        assert_eq!(ol.schedule(sim.state()), sim.state().label_driven());
    }

    #[test]
    fn ucb_never_label_drives() {
        let env = two_type_env();
        let trace = crate::sim::run(&env, Box::new(BacidUcb::new(&env).unwrap()), 2).unwrap();
        assert!(trace.periods.iter().all(|r| !r.decision.label_driven));
    }

    #[test]
    fn known_type_uses_true_moments() {
        let env = two_type_env();
        let mut ucb = BacidUcb::new(&env).unwrap();
        ucb.know_type(&env, 1).unwrap();
        let b = ucb.confidence(1, 10).unwrap();
        assert!((b.h_lo + 0.6).abs() < 1e-12);
        assert!(ucb.know_type(&env, 5).is_err());
    }
}
