//! Domain types for post types, cost distributions and environments.
//!
//! Costs are per-period harm: a positive cost means the post is harmful and
//! should be removed, a non-positive cost means it should stay up.
//! Schedules (arrival rates, reviewer capacity) are piecewise-constant
//! segment lists so that long horizons stay small on disk.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub type TypeId = usize;

/// Relative slack used when comparing declared rates against their bounds.
const RATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostShape {
    /// `value_pos` with probability `prob_pos`, otherwise `value_neg`.
    TwoPoint {
        value_pos: f64,
        value_neg: f64,
        prob_pos: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
}

/// A cost law together with its declared sub-Gaussian variance proxy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostDistribution {
    #[serde(flatten)]
    pub shape: CostShape,
    pub variance_proxy: f64,
}

impl CostDistribution {
    /// Two-point law with the tightest valid proxy `(a - b)^2 / 4`.
    pub fn two_point(value_pos: f64, value_neg: f64, prob_pos: f64) -> Self {
        let spread = value_pos - value_neg;
        Self {
            shape: CostShape::TwoPoint {
                value_pos,
                value_neg,
                prob_pos,
            },
            variance_proxy: spread * spread / 4.0,
        }
    }

    /// Cost `+1` with probability `prob_pos`, `-1` otherwise.
    pub fn signed_unit(prob_pos: f64) -> Self {
        Self::two_point(1.0, -1.0, prob_pos)
    }

    pub fn normal(mean: f64, std: f64) -> Self {
        Self {
            shape: CostShape::Normal { mean, std },
            variance_proxy: std * std,
        }
    }

    pub fn with_variance_proxy(mut self, proxy: f64) -> Self {
        self.variance_proxy = proxy;
        self
    }

    /// Smallest variance proxy this family is known to admit.
    pub fn minimal_proxy(&self) -> f64 {
        match self.shape {
            CostShape::TwoPoint {
                value_pos,
                value_neg,
                ..
            } => (value_pos - value_neg).powi(2) / 4.0,
            CostShape::Normal { std, .. } => std * std,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.shape {
            CostShape::TwoPoint {
                value_pos,
                value_neg,
                prob_pos,
            } => {
                if !value_pos.is_finite() || !value_neg.is_finite() {
                    return Err(Error::InvalidDistribution(
                        "two-point atoms must be finite".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&prob_pos) {
                    return Err(Error::InvalidDistribution(format!(
                        "prob_pos = {prob_pos} is not a probability"
                    )));
                }
            }
            CostShape::Normal { mean, std } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidDistribution(
                        "normal mean must be finite".into(),
                    ));
                }
                if !(std > 0.0 && std.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "normal std = {std} must be positive"
                    )));
                }
            }
        }
        let floor = self.minimal_proxy();
        if !(self.variance_proxy.is_finite() && self.variance_proxy >= floor * (1.0 - RATE_TOL)) {
            return Err(Error::InvalidDistribution(format!(
                "variance proxy {} is below the valid floor {floor}",
                self.variance_proxy
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self.shape {
            CostShape::TwoPoint {
                value_pos,
                value_neg,
                prob_pos,
            } => prob_pos * value_pos + (1.0 - prob_pos) * value_neg,
            CostShape::Normal { mean, .. } => mean,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_cost(self, rng)
    }
}

/// Closed-form cost moments of a type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `E[c^+]`: expected per-period harm of keeping the post.
    pub keep_cost: f64,
    /// `E[-c^-]`: expected per-period loss of removing the post.
    pub remove_cost: f64,
    /// Mean cost, `keep_cost - remove_cost`.
    pub mean: f64,
    /// Idiosyncrasy rate, `min(keep_cost, remove_cost)`.
    pub idiosyncrasy: f64,
}

impl Moments {
    pub fn from_parts(keep_cost: f64, remove_cost: f64) -> Self {
        Self {
            keep_cost,
            remove_cost,
            mean: keep_cost - remove_cost,
            idiosyncrasy: keep_cost.min(remove_cost),
        }
    }

    /// `E|c|`.
    pub fn abs_mean(&self) -> f64 {
        self.keep_cost + self.remove_cost
    }

    /// The classification that is optimal for a post of this type when its
    /// own cost is unknown.
    pub fn best_class(&self) -> Class {
        Class::from_mean_estimate(self.mean)
    }

    /// Expected per-period loss of classifying a post of this type as `class`.
    pub fn class_cost(&self, class: Class) -> f64 {
        match class {
            Class::Keep => self.keep_cost,
            Class::Remove => self.remove_cost,
        }
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn moments(dist: &CostDistribution) -> Result<Moments> {
    dist.validate()?;
    Ok(match dist.shape {
        CostShape::TwoPoint {
            value_pos,
            value_neg,
            prob_pos,
        } => {
            let q = 1.0 - prob_pos;
            Moments::from_parts(
                prob_pos * value_pos.max(0.0) + q * value_neg.max(0.0),
                prob_pos * (-value_pos.min(0.0)) + q * (-value_neg.min(0.0)),
            )
        }
        CostShape::Normal { mean, std } => {
            let z = mean / std;
            let keep = mean * std_normal_cdf(z) + std * std_normal_pdf(z);
            Moments::from_parts(keep, keep - mean)
        }
    })
}

pub fn sample_cost<R: Rng + ?Sized>(dist: &CostDistribution, rng: &mut R) -> f64 {
    match dist.shape {
        CostShape::TwoPoint {
            value_pos,
            value_neg,
            prob_pos,
        } => {
            if rng.random::<f64>() < prob_pos {
                value_pos
            } else {
                value_neg
            }
        }
        CostShape::Normal { mean, std } => Normal::new(mean, std)
            .expect("validated normal parameters")
            .sample(rng),
    }
}

/// Keep/remove decision. `Keep` corresponds to `Y = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Keep,
    Remove,
}

impl Class {
    /// Remove iff the (estimated) mean cost is strictly positive.
    pub fn from_mean_estimate(mean: f64) -> Self {
        if mean > 0.0 {
            Class::Remove
        } else {
            Class::Keep
        }
    }

    /// What an omniscient moderator does once the cost is known.
    pub fn clairvoyant(cost: f64) -> Self {
        if cost <= 0.0 {
            Class::Keep
        } else {
            Class::Remove
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub from_t: u64,
    pub value: T,
}

/// Piecewise-constant function of the period index (periods start at 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule<T>(pub Vec<Segment<T>>);

impl<T: Copy> Schedule<T> {
    pub fn constant(value: T) -> Self {
        Schedule(vec![Segment { from_t: 1, value }])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, T)>) -> Self {
        Schedule(
            pairs
                .into_iter()
                .map(|(from_t, value)| Segment { from_t, value })
                .collect(),
        )
    }

    pub fn at(&self, t: u64) -> T {
        let idx = self.0.partition_point(|s| s.from_t <= t);
        self.0[idx.saturating_sub(1)].value
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.0
    }

    fn check(&self) -> std::result::Result<(), String> {
        let first = self.0.first().ok_or("schedule has no segments")?;
        if first.from_t != 1 {
            return Err(format!(
                "schedule starts at t={} instead of 1",
                first.from_t
            ));
        }
        if self.0.windows(2).any(|w| w[1].from_t <= w[0].from_t) {
            return Err("segment start periods must strictly increase".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeParams {
    pub type_id: TypeId,
    pub lifetime: u64,
    pub service_rate: f64,
    pub dist: CostDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f64>>,
}

impl TypeParams {
    pub fn new(type_id: TypeId, lifetime: u64, service_rate: f64, dist: CostDistribution) -> Self {
        Self {
            type_id,
            lifetime,
            service_rate,
            dist,
            feature: None,
        }
    }

    pub fn with_feature(mut self, feature: Vec<f64>) -> Self {
        self.feature = Some(feature);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: u64,
    /// One schedule per type, indexed by type id.
    pub arrival_rates: Vec<Schedule<f64>>,
    pub capacity: Schedule<u32>,
    pub types: Vec<TypeParams>,
    pub r_max: f64,
    pub sigma_max: f64,
    /// Bound on feature (and parameter) Euclidean norms.
    #[serde(rename = "U", default = "one")]
    pub feature_bound: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Schedule,
    ArrivalSum,
    ArrivalRate,
    ServiceLoad,
    Distribution,
    CostBound,
    Lifetime,
    Feature,
    Bounds,
    Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub period: Option<u64>,
    pub type_id: Option<TypeId>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if let Some(t) = self.period {
            write!(f, " at t={t}")?;
        }
        if let Some(k) = self.type_id {
            write!(f, " (type {k})")?;
        }
        Ok(())
    }
}

impl EnvConfig {
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn arrival_rate(&self, k: TypeId, t: u64) -> f64 {
        self.arrival_rates[k].at(t)
    }

    pub fn capacity_at(&self, t: u64) -> u32 {
        self.capacity.at(t)
    }

    pub fn max_lifetime(&self) -> u64 {
        self.types.iter().map(|p| p.lifetime).max().unwrap_or(0)
    }

    pub fn max_capacity(&self) -> u32 {
        self.capacity
            .segments()
            .iter()
            .filter(|s| s.from_t <= self.horizon.max(1))
            .map(|s| s.value)
            .max()
            .unwrap_or(0)
    }

    /// Moments per type; fails if any distribution is invalid.
    pub fn moments(&self) -> Result<Vec<Moments>> {
        self.types.iter().map(|p| moments(&p.dist)).collect()
    }

    /// Feature of type `k`; one-hot in dimension K when none is declared.
    pub fn feature(&self, k: TypeId) -> Vec<f64> {
        match &self.types[k].feature {
            Some(phi) => phi.clone(),
            None => {
                let mut phi = vec![0.0; self.num_types()];
                phi[k] = 1.0;
                phi
            }
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.types
            .iter()
            .find_map(|p| p.feature.as_ref().map(Vec::len))
            .unwrap_or(self.num_types())
    }

    /// Periods in `1..=horizon` where some schedule changes value, always
    /// starting with 1 (empty for a zero horizon).
    pub fn breakpoints(&self) -> Vec<u64> {
        if self.horizon == 0 {
            return Vec::new();
        }
        let mut points: Vec<u64> = self
            .arrival_rates
            .iter()
            .flat_map(|s| s.segments().iter().map(|seg| seg.from_t))
            .chain(self.capacity.segments().iter().map(|seg| seg.from_t))
            .filter(|&t| t >= 1 && t <= self.horizon)
            .collect();
        points.push(1);
        points.sort_unstable();
        points.dedup();
        points
    }

    /// Same environment cut to the first `horizon` periods.
    pub fn truncated(&self, horizon: u64) -> EnvConfig {
        EnvConfig {
            horizon: horizon.min(self.horizon),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_env(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidEnv(violations))
        }
    }
}

/// Every invariant violation of `cfg`, each tagged with its location.
pub fn validate_env(cfg: &EnvConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, period, type_id, message: String| {
        out.push(Violation {
            kind,
            period,
            type_id,
            message,
        })
    };

    if !(cfg.r_max >= 1.0 && cfg.r_max.is_finite()) {
        push(
            ViolationKind::Bounds,
            None,
            None,
            format!("r_max = {} must be >= 1", cfg.r_max),
        );
    }
    if !(cfg.sigma_max > 0.0 && cfg.sigma_max.is_finite()) {
        push(
            ViolationKind::Bounds,
            None,
            None,
            format!("sigma_max = {} must be > 0", cfg.sigma_max),
        );
    }
    if !(cfg.feature_bound >= 1.0 && cfg.feature_bound.is_finite()) {
        push(
            ViolationKind::Bounds,
            None,
            None,
            format!("U = {} must be >= 1", cfg.feature_bound),
        );
    }
    if cfg.arrival_rates.len() != cfg.types.len() {
        push(
            ViolationKind::Shape,
            None,
            None,
            format!(
                "{} arrival schedules for {} types",
                cfg.arrival_rates.len(),
                cfg.types.len()
            ),
        );
        return out;
    }
    if let Err(msg) = cfg.capacity.check() {
        push(
            ViolationKind::Schedule,
            None,
            None,
            format!("capacity: {msg}"),
        );
        return out;
    }
    let mut schedules_ok = true;
    for (k, sched) in cfg.arrival_rates.iter().enumerate() {
        if let Err(msg) = sched.check() {
            push(
                ViolationKind::Schedule,
                None,
                Some(k),
                format!("arrival rates: {msg}"),
            );
            schedules_ok = false;
        }
    }

    let dim = cfg.feature_dim();
    let any_feature = cfg.types.iter().any(|p| p.feature.is_some());
    for (k, p) in cfg.types.iter().enumerate() {
        if p.type_id != k {
            push(
                ViolationKind::Shape,
                None,
                Some(k),
                format!("type_id {} stored at index {k}", p.type_id),
            );
        }
        if p.lifetime < 1 {
            push(
                ViolationKind::Lifetime,
                None,
                Some(k),
                "lifetime must be >= 1".into(),
            );
        }
        if !(p.service_rate >= 0.0 && p.service_rate <= 1.0) {
            push(
                ViolationKind::ServiceLoad,
                None,
                Some(k),
                format!("service rate {} outside [0, 1]", p.service_rate),
            );
        }
        match moments(&p.dist) {
            Err(e) => push(ViolationKind::Distribution, None, Some(k), e.to_string()),
            Ok(m) => {
                if m.abs_mean() > cfg.r_max * (1.0 + RATE_TOL) {
                    push(
                        ViolationKind::CostBound,
                        None,
                        Some(k),
                        format!("E|c| = {:.6} exceeds r_max = {}", m.abs_mean(), cfg.r_max),
                    );
                }
                if p.dist.variance_proxy > cfg.sigma_max * cfg.sigma_max * (1.0 + RATE_TOL) {
                    push(
                        ViolationKind::Distribution,
                        None,
                        Some(k),
                        format!(
                            "variance proxy {} exceeds sigma_max^2 = {}",
                            p.dist.variance_proxy,
                            cfg.sigma_max * cfg.sigma_max
                        ),
                    );
                }
            }
        }
        match &p.feature {
            Some(phi) => {
                if phi.len() != dim {
                    push(
                        ViolationKind::Feature,
                        None,
                        Some(k),
                        format!("feature has dimension {} not {dim}", phi.len()),
                    );
                }
                if phi.iter().any(|x| !x.is_finite()) {
                    push(
                        ViolationKind::Feature,
                        None,
                        Some(k),
                        "feature has non-finite entries".into(),
                    );
                }
                let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > cfg.feature_bound * (1.0 + RATE_TOL) {
                    push(
                        ViolationKind::Feature,
                        None,
                        Some(k),
                        format!("||phi|| = {norm:.6} exceeds U = {}", cfg.feature_bound),
                    );
                }
            }
            None if any_feature => {
                push(
                    ViolationKind::Feature,
                    None,
                    Some(k),
                    "feature missing while other types declare one".into(),
                );
            }
            None => {}
        }
    }

    if !schedules_ok {
        return out;
    }
    // Report each violation once per contiguous run of offending segments.
    let mut active: Vec<(ViolationKind, Option<TypeId>)> = Vec::new();
    for t in cfg.breakpoints() {
        let mut now = Vec::new();
        let mut found = Vec::new();
        let mut total = 0.0;
        for k in 0..cfg.num_types() {
            let rate = cfg.arrival_rate(k, t);
            if !(0.0..=1.0).contains(&rate) {
                found.push((
                    ViolationKind::ArrivalRate,
                    Some(k),
                    format!("lambda = {rate} outside [0, 1]"),
                ));
            }
            total += rate;
        }
        if total > 1.0 + RATE_TOL {
            found.push((
                ViolationKind::ArrivalSum,
                None,
                format!("sum of lambda = {total} > 1"),
            ));
        }
        let n = f64::from(cfg.capacity_at(t));
        for (k, p) in cfg.types.iter().enumerate() {
            if n * p.service_rate > 1.0 + RATE_TOL {
                found.push((
                    ViolationKind::ServiceLoad,
                    Some(k),
                    format!("N * mu = {} > 1", n * p.service_rate),
                ));
            }
        }
        for (kind, k, message) in found {
            if !active.contains(&(kind, k)) {
                push(kind, Some(t), k, message);
            }
            now.push((kind, k));
        }
        active = now;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn duty_cycle() -> EnvConfig {
        let mut blocks = Vec::new();
        for b in 0..10u64 {
            blocks.push((1 + 5000 * b, 9));
            blocks.push((4001 + 5000 * b, 2));
        }
        EnvConfig {
            horizon: 50_000,
            arrival_rates: vec![Schedule::constant(0.2), Schedule::constant(0.4)],
            capacity: Schedule::from_pairs(blocks),
            types: vec![
                TypeParams::new(0, 500, 0.05, CostDistribution::normal(-1.0, 1.0)),
                TypeParams::new(1, 500, 0.05, CostDistribution::normal(0.1, 1.0)),
            ],
            r_max: 2.0,
            sigma_max: 1.0,
            feature_bound: 1.0,
        }
    }

    #[test]
    fn symmetric_two_point_moments() {
        let m = moments(&CostDistribution::signed_unit(0.5)).unwrap();
        assert_eq!(m.keep_cost, 0.5);
        assert_eq!(m.remove_cost, 0.5);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.idiosyncrasy, 0.5);
    }

    #[test]
    fn skewed_two_point_moments() {
        let m = moments(&CostDistribution::signed_unit(0.95)).unwrap();
        assert!((m.keep_cost - 0.95).abs() < 1e-15);
        assert!((m.remove_cost - 0.05).abs() < 1e-15);
        assert!((m.mean - 0.9).abs() < 1e-12);
        assert!((m.idiosyncrasy - 0.05).abs() < 1e-15);
    }

    #[test]
    fn normal_moments_closed_form() {
        let m = moments(&CostDistribution::normal(-1.0, 1.0)).unwrap();
        assert!((m.keep_cost - 0.083_315_8).abs() < 1e-6, "{}", m.keep_cost);
        assert!((m.remove_cost - 1.083_315_8).abs() < 1e-6);
        assert!((m.mean + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_matches_analytic_mean() {
        for dist in [
            CostDistribution::normal(0.37, 2.1),
            CostDistribution::normal(-3.0, 0.2),
            CostDistribution::two_point(2.5, -0.5, 0.3),
            CostDistribution::two_point(-1.0, -4.0, 0.7),
        ] {
            let m = moments(&dist).unwrap();
            assert!((m.mean - dist.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(moments(&CostDistribution::signed_unit(1.2)).is_err());
        assert!(moments(&CostDistribution::normal(0.0, 0.0)).is_err());
        assert!(moments(&CostDistribution::normal(0.0, 1.0).with_variance_proxy(0.5)).is_err());
        assert!(moments(&CostDistribution::signed_unit(0.5).with_variance_proxy(0.99)).is_err());
    }

    #[test]
    fn degenerate_two_point_always_positive_atom() {
        let dist = CostDistribution::signed_unit(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| sample_cost(&dist, &mut rng) == 1.0));
    }

    #[test]
    fn normal_sample_mean_is_close() {
        let dist = CostDistribution::normal(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_cost(&dist, &mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let dist = CostDistribution::normal(0.3, 1.5);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .map(|_| sample_cost(&dist, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn schedule_lookup() {
        let s = Schedule::from_pairs([(1, 9u32), (4001, 2), (5001, 9)]);
        assert_eq!(s.at(1), 9);
        assert_eq!(s.at(4000), 9);
        assert_eq!(s.at(4001), 2);
        assert_eq!(s.at(5000), 2);
        assert_eq!(s.at(5001), 9);
        assert_eq!(s.at(99_999), 9);
    }

    #[test]
    fn duty_cycle_config_is_valid() {
        assert!(
            validate_env(&duty_cycle()).is_empty(),
            "{:?}",
            validate_env(&duty_cycle())
        );
    }

    #[test]
    fn arrival_sum_violation_is_reported() {
        let mut env = duty_cycle();
        env.arrival_rates = vec![
            Schedule::from_pairs([(1, 0.2), (100, 0.7)]),
            Schedule::constant(0.5),
        ];
        let v = validate_env(&env);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::ArrivalSum);
        assert_eq!(v[0].period, Some(100));
    }

    #[test]
    fn service_load_violation_is_reported() {
        let mut env = duty_cycle();
        env.capacity = Schedule::constant(3);
        env.types[1].service_rate = 0.5;
        let v = validate_env(&env);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::ServiceLoad);
        assert_eq!(v[0].type_id, Some(1));
    }

    #[test]
    fn cost_bound_and_feature_violations() {
        let mut env = duty_cycle();
        env.r_max = 1.0;
        env.types[0].feature = Some(vec![3.0, 0.0]);
        let kinds: Vec<_> = validate_env(&env).into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::CostBound));
        assert!(kinds.contains(&ViolationKind::Feature));
    }

    #[test]
    fn env_json_roundtrip() {
        let env = duty_cycle();
        let text = serde_json::to_string(&env).unwrap();
        assert!(text.contains("\"from_t\""));
        assert!(text.contains("\"variance_proxy\""));
        let back: EnvConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn one_hot_default_features() {
        let env = duty_cycle();
        assert_eq!(env.feature(1), vec![0.0, 1.0]);
        assert_eq!(env.feature_dim(), 2);
    }
}
