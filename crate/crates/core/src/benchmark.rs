//! The w-fluid benchmark, average regret, and the stationary analysis of
//! deterministic threshold policies.
//!
//! The benchmark relaxes the queue to a fluid that must respect review
//! capacity only in aggregate over consecutive windows of at most `w`
//! periods. Given the windows, each one is a fractional knapsack: reviewer
//! slots are spent on types in order of value per slot `r_k * l_k * mu_k`.
//! The best partition is found by dynamic programming over window ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostDistribution, EnvConfig, Schedule, TypeId, TypeParams};
use crate::policy::Threshold;
use crate::sim::Simulation;

/// One window `[start, end]` of the fluid solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidWindow {
    pub start: u64,
    pub end: u64,
    /// Reviewer slots `sum_t N(t)`.
    pub capacity: f64,
    /// Arrival mass `sum_t lambda_k(t)` per type.
    pub arrivals: Vec<f64>,
    /// Slots given to each type.
    pub slots: Vec<f64>,
    /// Admitted mass per type.
    pub admitted: Vec<f64>,
}

impl FluidWindow {
    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t <= self.end
    }

    /// Share of arrivals admitted, constant within the window.
    pub fn admission_probability(&self, k: TypeId) -> f64 {
        if self.arrivals[k] > 0.0 {
            (self.admitted[k] / self.arrivals[k]).min(1.0)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidSolution {
    pub horizon: u64,
    pub w: u64,
    /// Value `r_k * l_k` of one admitted unit of type k.
    pub values: Vec<f64>,
    pub windows: Vec<FluidWindow>,
    /// `L*(w, T)`.
    pub objective: f64,
}

impl FluidSolution {
    pub fn num_types(&self) -> usize {
        self.values.len()
    }

    pub fn window_at(&self, t: u64) -> Option<&FluidWindow> {
        if t == 0 || t > self.horizon {
            return None;
        }
        let i = self.windows.partition_point(|win| win.end < t);
        self.windows.get(i)
    }

    /// Per-period admission mass `a_k(t)`.
    pub fn admission(&self, env: &EnvConfig, k: TypeId, t: u64) -> f64 {
        self.window_at(t).map_or(0.0, |win| {
            win.admission_probability(k) * env.arrival_rate(k, t)
        })
    }

    /// Per-period service fraction `nu_k(t)`.
    pub fn service_fraction(&self, k: TypeId, t: u64) -> f64 {
        self.window_at(t).map_or(0.0, |win| {
            if win.capacity > 0.0 {
                win.slots[k] / win.capacity
            } else {
                0.0
            }
        })
    }

    /// `(first period, admission probability per type)` with consecutive
    /// equal windows merged.
    pub fn admission_probability_segments(&self) -> Vec<(u64, Vec<f64>)> {
        let mut out: Vec<(u64, Vec<f64>)> = Vec::new();
        for win in &self.windows {
            let probs: Vec<f64> = (0..self.num_types())
                .map(|k| win.admission_probability(k))
                .collect();
            if out.last().is_none_or(|(_, p)| *p != probs) {
                out.push((win.start, probs));
            }
        }
        out
    }

    /// Objective recomputed period by period from the masses.
    pub fn recompute_objective(&self, env: &EnvConfig) -> f64 {
        let mut total = 0.0;
        for t in 1..=self.horizon {
            for k in 0..self.num_types() {
                total += self.values[k] * (env.arrival_rate(k, t) - self.admission(env, k, t));
            }
        }
        total
    }

    /// Compact JSON: per-window masses merged into segments, plus the objective.
    pub fn export_json(&self) -> serde_json::Value {
        let segments: Vec<serde_json::Value> = self
            .admission_probability_segments()
            .into_iter()
            .map(|(from_t, probs)| serde_json::json!({ "from_t": from_t, "admission_probability": probs }))
            .collect();
        serde_json::json!({
            "w": self.w,
            "horizon": self.horizon,
            "objective": self.objective,
            "segments": segments,
        })
    }
}

/// Solve the w-fluid benchmark: the cheapest partition of `1..=T` into
/// windows of at most `w` periods, each window allocated greedily.
///
/// Runs in `O(T * min(w, T) * K)`; with `w >= T` the single window is
/// optimal because merging windows only relaxes the constraints.
pub fn solve_w_fluid(env: &EnvConfig, w: u64) -> Result<FluidSolution> {
    if w < 1 {
        return Err(Error::Config("fluid window must be at least 1".into()));
    }
    let moments = env.moments()?;
    let num_types = env.num_types();
    let values: Vec<f64> = moments
        .iter()
        .zip(&env.types)
        .map(|(m, p)| m.idiosyncrasy * p.lifetime as f64)
        .collect();
    let rates: Vec<f64> = env.types.iter().map(|p| p.service_rate).collect();
    let mut order: Vec<TypeId> = (0..num_types).collect();
    // Stable sort keeps the lower index first on equal value per slot.
    order.sort_by(|&a, &b| (values[b] * rates[b]).total_cmp(&(values[a] * rates[a])));

    let horizon = env.horizon as usize;
    let ends: Vec<usize> = if w >= env.horizon {
        if horizon == 0 {
            Vec::new()
        } else {
            vec![horizon]
        }
    } else {
        best_partition(env, w as usize, &order, &values, &rates)
    };

    let mut windows = Vec::with_capacity(ends.len());
    let mut objective = 0.0;
    let mut start = 1u64;
    for end in ends {
        let end = end as u64;
        let mut capacity = 0.0;
        let mut arrivals = vec![0.0; num_types];
        for t in start..=end {
            capacity += f64::from(env.capacity_at(t));
            for (k, mass) in arrivals.iter_mut().enumerate() {
                *mass += env.arrival_rate(k, t);
            }
        }
        let (slots, admitted) = knapsack(&order, &values, &rates, &arrivals, capacity);
        objective += window_loss(&values, &arrivals, &admitted);
        windows.push(FluidWindow {
            start,
            end,
            capacity,
            arrivals,
            slots,
            admitted,
        });
        start = end + 1;
    }
    Ok(FluidSolution {
        horizon: env.horizon,
        w,
        values,
        windows,
        objective,
    })
}

fn window_loss(values: &[f64], arrivals: &[f64], admitted: &[f64]) -> f64 {
    (0..values.len())
        .map(|k| values[k] * (arrivals[k] - admitted[k]))
        .sum()
}

/// Window end periods of a cheapest partition. On ties the longest last
/// window wins.
fn best_partition(
    env: &EnvConfig,
    w: usize,
    order: &[TypeId],
    values: &[f64],
    rates: &[f64],
) -> Vec<usize> {
    let horizon = env.horizon as usize;
    let num_types = env.num_types();
    let mut cap = vec![0.0; horizon + 1];
    let mut lam = vec![vec![0.0; horizon + 1]; num_types];
    for t in 1..=horizon {
        cap[t] = cap[t - 1] + f64::from(env.capacity_at(t as u64));
        for (k, prefix) in lam.iter_mut().enumerate() {
            prefix[t] = prefix[t - 1] + env.arrival_rate(k, t as u64);
        }
    }
    let mut best = vec![0.0; horizon + 1];
    let mut from = vec![0usize; horizon + 1];
    let mut arrivals = vec![0.0; num_types];
    for end in 1..=horizon {
        let mut best_cost = f64::INFINITY;
        for start in end.saturating_sub(w - 1).max(1)..=end {
            for (k, mass) in arrivals.iter_mut().enumerate() {
                *mass = lam[k][end] - lam[k][start - 1];
            }
            let (_, admitted) =
                knapsack(order, values, rates, &arrivals, cap[end] - cap[start - 1]);
            let cost = best[start - 1] + window_loss(values, &arrivals, &admitted);
            if cost < best_cost {
                best_cost = cost;
                from[end] = start;
            }
        }
        best[end] = best_cost;
    }
    let mut ends = Vec::new();
    let mut end = horizon;
    while end > 0 {
        ends.push(end);
        end = from[end] - 1;
    }
    ends.reverse();
    ends
}

/// Greedy fractional allocation of `capacity` slots.
fn knapsack(
    order: &[TypeId],
    values: &[f64],
    rates: &[f64],
    arrivals: &[f64],
    capacity: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut slots = vec![0.0; values.len()];
    let mut admitted = vec![0.0; values.len()];
    let mut remaining = capacity;
    for &k in order {
        if remaining <= 0.0 || values[k] <= 0.0 || arrivals[k] <= 0.0 {
            continue;
        }
        let needed = arrivals[k] / rates[k];
        if needed <= remaining {
            slots[k] = needed;
            admitted[k] = arrivals[k];
            remaining -= needed;
        } else {
            slots[k] = remaining;
            admitted[k] = (rates[k] * remaining).min(arrivals[k]);
            remaining = 0.0;
        }
    }
    (slots, admitted)
}

/// `mean_loss / T - L* / T`.
pub fn average_regret(mean_loss: f64, fluid: &FluidSolution, horizon: u64) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    (mean_loss - fluid.objective) / horizon as f64
}

/// Stationary per-period loss `f(theta)` of the threshold-`theta` policy on
/// the balking Geo/Geo/1 instance, as an exact fraction
/// `(numerator, denominator)`:
/// `f = (l + 2 sum_{q < theta} min(q, l)) / (4 theta + 2)`.
pub fn threshold_stationary_ratio(lifetime: u64, theta: u64) -> (u128, u128) {
    let l = u128::from(lifetime);
    let th = u128::from(theta);
    // sum_{q=0}^{theta-1} min(q, l), split at q = l.
    let below = th.min(l + 1);
    let sum_small = below * below.saturating_sub(1) / 2;
    let sum_large = th.saturating_sub(l + 1) * l;
    (l + 2 * (sum_small + sum_large), 4 * th + 2)
}

pub fn threshold_stationary(lifetime: u64, theta: u64) -> f64 {
    let (num, den) = threshold_stationary_ratio(lifetime, theta);
    num as f64 / den as f64
}

/// `min_{theta <= theta_max} f(theta)` and its minimizer (smallest on ties),
/// compared exactly by cross-multiplication.
pub fn threshold_minimum(lifetime: u64, theta_max: u64) -> (u64, f64) {
    let mut best = (0, threshold_stationary_ratio(lifetime, 0));
    for theta in 1..=theta_max {
        let (n, d) = threshold_stationary_ratio(lifetime, theta);
        let (bn, bd) = best.1;
        if n * bd < bn * d {
            best = (theta, (n, d));
        }
    }
    (best.0, best.1 .0 as f64 / best.1 .1 as f64)
}

/// The single-type balking instance: `lambda = mu = 1/2`, `N = 1`, costs
/// `+-2` with equal probability (so `r = 1`).
pub fn threshold_instance(lifetime: u64, horizon: u64) -> EnvConfig {
    EnvConfig {
        horizon,
        arrival_rates: vec![Schedule::constant(0.5)],
        capacity: Schedule::constant(1),
        types: vec![TypeParams::new(
            0,
            lifetime,
            0.5,
            CostDistribution::two_point(2.0, -2.0, 0.5),
        )],
        r_max: 2.0,
        sigma_max: 2.0,
        feature_bound: 1.0,
    }
}

/// Long-run average of the per-period surrogate loss of the threshold
/// policy on [`threshold_instance`]: an arrival that finds `Q >= theta` costs
/// `l`, one admitted behind `Q` posts costs `min(Q, l)`.
pub fn simulate_threshold(lifetime: u64, theta: u64, periods: u64, seed: u64) -> Result<f64> {
    let env = threshold_instance(lifetime, periods);
    let policy = Threshold::new(&env, theta)?;
    let mut sim = Simulation::new(&env, Box::new(policy), seed)?.without_records();
    let mut total = 0u64;
    while !sim.done() {
        let q = sim.state().queue_len(0) as u64;
        let rec = sim.step()?;
        if rec.arrival.is_some() {
            total += if q >= theta {
                lifetime
            } else {
                q.min(lifetime)
            };
        }
    }
    Ok(total as f64 / periods.max(1) as f64)
}
