//! Shared generators and trace checks for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use moderation_pipeline::model::{moments, sample_cost, TypeId};
use moderation_pipeline::policy::GroupPartition;
use moderation_pipeline::sim::{littles_law_sides, Route};
use moderation_pipeline::{CostDistribution, EnvConfig, Schedule, Trace, TypeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random environment: `k` types, piecewise-constant rates and
/// capacity, lifetimes at least `k` so that `beta * l_max >= 1`.
pub fn random_env(seed: u64, k: usize, horizon: u64) -> EnvConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_max = rng.random_range(1..=4u32);
    let blocks = rng.random_range(1..=3u64);
    let block_len = horizon.div_ceil(blocks).max(1);
    let mut rates: Vec<Vec<(u64, f64)>> = vec![Vec::new(); k];
    let mut capacity = Vec::new();
    for b in 0..blocks {
        let from = 1 + b * block_len;
        let mut raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum::<f64>() / rng.random_range(0.3..1.0);
        for r in &mut raw {
            *r /= total.max(1.0);
        }
        for (kk, r) in raw.into_iter().enumerate() {
            rates[kk].push((from, r));
        }
        capacity.push((from, rng.random_range(0..=n_max)));
    }
    capacity[0].1 = capacity[0].1.max(1);
    let types = (0..k)
        .map(|kk| {
            let dist = if rng.random_bool(0.5) {
                CostDistribution::two_point(
                    rng.random_range(0.2..1.0),
                    -rng.random_range(0.2..1.0),
                    rng.random(),
                )
            } else {
                CostDistribution::normal(rng.random_range(-0.6..0.6), rng.random_range(0.3..0.75))
            };
            let mu = rng.random_range(0.05..=1.0) / f64::from(n_max);
            TypeParams::new(kk, rng.random_range(k as u64..=60), mu, dist)
        })
        .collect();
    EnvConfig {
        horizon,
        arrival_rates: rates.into_iter().map(Schedule::from_pairs).collect(),
        capacity: Schedule::from_pairs(capacity),
        types,
        r_max: 1.0,
        sigma_max: 1.0,
        feature_bound: 1.0,
    }
}

/// `Q_k <= bound[k]` at every snapshot.
pub fn check_type_queue_bound(trace: &Trace, bound: &[f64]) -> Result<(), String> {
    for rec in &trace.periods {
        for (k, &q) in rec.queue.iter().enumerate() {
            if f64::from(q) > bound[k] + 1e-9 {
                return Err(format!("t={}: Q_{k}={q} exceeds {}", rec.t, bound[k]));
            }
        }
    }
    Ok(())
}

/// Group queue `sum_{k in g} Q_k <= bound` at every snapshot.
pub fn check_group_queue_bound(
    trace: &Trace,
    groups: &GroupPartition,
    bound: f64,
) -> Result<(), String> {
    for rec in &trace.periods {
        for (g, members) in groups.members.iter().enumerate() {
            let q: u32 = members.iter().map(|&k| rec.queue[k]).sum();
            if f64::from(q) > bound + 1e-9 {
                return Err(format!("t={}: group {g} holds {q} > {bound}", rec.t));
            }
        }
    }
    Ok(())
}

pub fn check_label_driven(trace: &Trace) -> Result<(), String> {
    for rec in &trace.periods {
        if rec.label_driven > 1 {
            return Err(format!(
                "t={}: {} label-driven posts",
                rec.t, rec.label_driven
            ));
        }
    }
    Ok(())
}

/// While a label-driven post waits, it is the one scheduled.
pub fn check_forced_scheduling(trace: &Trace) -> Result<(), String> {
    for rec in &trace.periods {
        if rec.label_driven == 1 {
            let scheduled = rec.decision.schedule.map(|id| trace.posts[id].route);
            if scheduled != Some(Route::LabelDriven) {
                return Err(format!(
                    "t={}: label-driven post waiting but {scheduled:?} scheduled",
                    rec.t
                ));
            }
        }
    }
    Ok(())
}

/// Review-queue posts of the same key complete in admission order; posts
/// never reviewed come last.
pub fn check_fcfs(trace: &Trace, key: impl Fn(TypeId) -> usize) -> Result<(), String> {
    let mut last: BTreeMap<usize, (u64, bool)> = BTreeMap::new();
    for post in trace.posts.iter().filter(|p| p.route == Route::Review) {
        let g = key(post.type_id);
        let done = post.review_completion_period;
        if let Some((prev, prev_done)) = last.get(&g) {
            match done {
                Some(d) if !prev_done || d < *prev => {
                    return Err(format!(
                        "post {} of key {g} overtook an earlier post",
                        post.post_id
                    ));
                }
                _ => {}
            }
        }
        last.insert(g, (done.unwrap_or(u64::MAX), done.is_some()));
    }
    Ok(())
}

/// Every snapshot equals the admitted posts not yet reviewed, per type and
/// for the label-driven slot.
pub fn check_conservation(trace: &Trace) -> Result<(), String> {
    let k = trace.env.num_types();
    for rec in &trace.periods {
        let t = rec.t;
        let waiting = |p: &&moderation_pipeline::sim::Post| {
            p.arrival_period <= t && p.review_completion_period.is_none_or(|d| d >= t)
        };
        let mut queue = vec![0u32; k];
        let mut ld = 0u32;
        for p in trace.posts.iter().filter(waiting) {
            match p.route {
                Route::Review => queue[p.type_id] += 1,
                Route::LabelDriven => ld += 1,
                Route::NotAdmitted => {}
            }
        }
        if queue != rec.queue || ld != rec.label_driven {
            return Err(format!(
                "t={t}: snapshot {:?}+{} but posts give {queue:?}+{ld}",
                rec.queue, rec.label_driven
            ));
        }
    }
    Ok(())
}

pub fn check_littles_law(trace: &Trace) -> Result<(), String> {
    let (a, b) = littles_law_sides(trace);
    if a == b {
        Ok(())
    } else {
        Err(format!("time in system {a} != summed occupancy {b}"))
    }
}

/// Direct recount of the occupancy side, independent of the records.
pub fn occupancy_by_recount(trace: &Trace) -> u64 {
    let horizon = trace.env.horizon;
    (1..=horizon)
        .map(|t| {
            trace
                .posts
                .iter()
                .filter(|p| {
                    p.route != Route::NotAdmitted
                        && p.arrival_period <= t
                        && p.review_completion_period.is_none_or(|d| d >= t)
                })
                .count() as u64
        })
        .sum()
}

pub fn jsonl_bytes(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::new();
    trace.write_jsonl(&mut out).expect("in-memory write");
    out
}

/// Empirical MGF of `c^+ - E[c^+]` stays under the `2 s^2` proxy bound.
pub fn positive_part_is_subgaussian(mean: f64, std: f64, seed: u64) -> Result<(), String> {
    let dist = CostDistribution::normal(mean, std);
    let keep = moments(&dist).unwrap().keep_cost;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ys: Vec<f64> = (0..100_000)
        .map(|_| sample_cost(&dist, &mut rng).max(0.0) - keep)
        .collect();
    for u in [-1.0, -0.5, 0.5, 1.0] {
        let mgf = ys.iter().map(|y| (u * y).exp()).sum::<f64>() / ys.len() as f64;
        let bound = (u * u * 2.0 * std * std / 2.0).exp() * 1.05;
        if mgf > bound {
            return Err(format!("N({mean},{std}) at u={u}: {mgf} > {bound}"));
        }
    }
    Ok(())
}

/// Misses of the sample-average bounds over `reps` stationary streams,
/// checked at every `t` in `10..=t_max` with `n = t - 1` samples, and the
/// aggregate allowance `reps * sum_t 4 t^-3`.
pub fn sample_mean_coverage(
    dist: &CostDistribution,
    sigma_max: f64,
    r_max: f64,
    reps: u64,
    t_max: u64,
    seed: u64,
) -> (u64, f64) {
    use moderation_pipeline::policy::learning::conf_bounds;
    use moderation_pipeline::policy::TypeStats;
    let truth = moments(dist).unwrap();
    let mut misses = 0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep));
        let mut stats = TypeStats::default();
        for t in 2..=t_max {
            stats.push(sample_cost(dist, &mut rng));
            if t >= 10 && !conf_bounds(&stats, t, sigma_max, r_max).covers(&truth) {
                misses += 1;
            }
        }
    }
    let allowance = reps as f64 * (10..=t_max).map(|t| 4.0 / (t as f64).powi(3)).sum::<f64>();
    (misses, allowance)
}

/// Synthetic linear data for the ridge ellipsoids: `phi = (1, x)` with
/// `x` uniform in `[0, 1]^(d-1)` and a `+-1` cost that is `+1` with
/// probability `phi . pi`, so `E[c+] = phi . pi` and `E[c-] = phi . (pi - e_1)`.
pub struct LinearCosts {
    pub pi: Vec<f64>,
}

impl LinearCosts {
    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> (nalgebra::DVector<f64>, f64) {
        let d = self.dim();
        let phi = nalgebra::DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { rng.random() });
        let p: f64 = phi.iter().zip(&self.pi).map(|(a, b)| a * b).sum();
        let cost = if rng.random_bool(p.clamp(0.0, 1.0)) {
            1.0
        } else {
            -1.0
        };
        (phi, cost)
    }

    pub fn theta_keep(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_vec(self.pi.clone())
    }

    pub fn theta_neg(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_fn(self.dim(), |i, _| {
            self.pi[i] - if i == 0 { 1.0 } else { 0.0 }
        })
    }
}

/// Share of replications whose two ellipsoids contain the true parameters
/// after every one of `t_max` updates.
pub fn ellipsoid_coverage(
    model: &LinearCosts,
    sigma_max: f64,
    delta: f64,
    reps: u64,
    t_max: u64,
    seed: u64,
) -> f64 {
    use moderation_pipeline::policy::contextual::b_delta;
    use moderation_pipeline::policy::RidgeState;
    let d = model.dim();
    let u = (d as f64).sqrt();
    let kappa = u * u;
    let keep = model.theta_keep();
    let neg = model.theta_neg();
    let mut covered = 0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep));
        let mut ridge = RidgeState::new(d, kappa).unwrap();
        let mut ok = true;
        for _ in 0..t_max {
            let (phi, cost) = model.draw(&mut rng);
            ridge.update(&phi, cost).unwrap();
            let b = b_delta(ridge.count(), d, u, kappa, sigma_max, delta);
            let v = ridge.gram();
            let dist = |e: nalgebra::DVector<f64>| e.dot(&(v * &e)).max(0.0).sqrt();
            if dist(ridge.theta_keep() - &keep) > b || dist(ridge.theta_neg() - &neg) > b {
                ok = false;
                break;
            }
        }
        covered += u64::from(ok);
    }
    covered as f64 / reps as f64
}

/// Largest gap between the closed-form contextual bounds and a brute-force
/// search over the boundaries of the two `d = 2` ellipsoids.
pub fn rbar_grid_error(instances: u64, seed: u64) -> f64 {
    use moderation_pipeline::policy::contextual::contextual_conf;
    use moderation_pipeline::policy::RidgeState;
    use nalgebra::{DVector, Vector2};
    const ANGLES: usize = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let mut ridge = RidgeState::new(2, rng.random_range(0.5..3.0)).unwrap();
        for _ in 0..rng.random_range(0..40) {
            let phi = DVector::from_vec(vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            ridge.update(&phi, rng.random_range(-1.5..1.5)).unwrap();
        }
        let phi = DVector::from_vec(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let b = rng.random_range(0.0..2.0);
        let r_max = rng.random_range(0.5..3.0);
        let got = contextual_conf(&ridge, &phi, b, r_max).unwrap();

        // theta = center + b L^-T u traces the boundary of ||theta - center||_V = b.
        let chol = ridge.gram().clone().cholesky().unwrap();
        let l_inv_t = chol.l().try_inverse().unwrap().transpose();
        let extreme = |center: &DVector<f64>| -> (f64, f64) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..ANGLES {
                let a = std::f64::consts::TAU * i as f64 / ANGLES as f64;
                let dir = &l_inv_t
                    * DVector::from_column_slice(Vector2::new(a.cos(), a.sin()).as_slice());
                let value = phi.dot(&(center + dir * b));
                lo = lo.min(value);
                hi = hi.max(value);
            }
            (lo, hi)
        };
        let (keep_lo, keep_hi) = extreme(ridge.theta_keep());
        let (remove_lo, remove_hi) = extreme(&ridge.theta_remove());
        let r_bar = keep_hi.min(remove_hi).clamp(0.0, r_max);
        let h_lo = (keep_lo - remove_hi).max(-r_max);
        let h_hi = (keep_hi - remove_lo).min(r_max);
        worst = worst
            .max((got.r_bar - r_bar).abs())
            .max((got.h_lo - h_lo).abs())
            .max((got.h_hi - h_hi).abs());
    }
    worst
}

/// Compositions of `total` into consecutive parts of size at most `w`.
pub fn partitions(total: usize, w: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=w.min(total) {
        for mut rest in partitions(total - first, w) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Minimum of the full LP over every admissible partition.
pub fn lp_oracle(env: &EnvConfig, w: usize) -> f64 {
    let horizon = env.horizon as usize;
    let k = env.num_types();
    let values: Vec<f64> = env
        .moments()
        .unwrap()
        .iter()
        .zip(&env.types)
        .map(|(m, p)| m.idiosyncrasy * p.lifetime as f64)
        .collect();
    let total: f64 = (1..=horizon as u64)
        .map(|t| {
            (0..k)
                .map(|i| values[i] * env.arrival_rate(i, t))
                .sum::<f64>()
        })
        .sum();
    let mut best = f64::INFINITY;
    for parts in partitions(horizon, w) {
        let mut lp = minilp::Problem::new(minilp::OptimizationDirection::Maximize);
        let mut a = Vec::new();
        let mut nu = Vec::new();
        for t in 1..=horizon as u64 {
            a.push(
                (0..k)
                    .map(|i| lp.add_var(values[i], (0.0, env.arrival_rate(i, t))))
                    .collect::<Vec<_>>(),
            );
            nu.push(
                (0..k)
                    .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
                    .collect::<Vec<_>>(),
            );
        }
        for row in &nu {
            lp.add_constraint(
                row.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
                minilp::ComparisonOp::Le,
                1.0,
            );
        }
        let mut start = 0;
        for len in parts {
            for i in 0..k {
                let mut expr = Vec::new();
                for t in start..start + len {
                    expr.push((a[t][i], 1.0));
                    let n = f64::from(env.capacity_at(t as u64 + 1));
                    expr.push((nu[t][i], -env.types[i].service_rate * n));
                }
                lp.add_constraint(expr, minilp::ComparisonOp::Le, 0.0);
            }
            start += len;
        }
        let gained = lp.solve().unwrap().objective();
        best = best.min(total - gained);
    }
    best
}

pub fn tiny_env(rng: &mut ChaCha8Rng) -> EnvConfig {
    let k = rng.random_range(1..=3usize);
    let horizon = rng.random_range(1..=6u64);
    let mut rates = vec![Vec::new(); k];
    let mut capacity = Vec::new();
    for t in 1..=horizon {
        let raw: Vec<f64> = (0..k)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random()
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        for (i, r) in raw.into_iter().enumerate() {
            rates[i].push((t, if sum > 1.0 { r / sum } else { r }));
        }
        capacity.push((t, rng.random_range(0..=3u32)));
    }
    let types = (0..k)
        .map(|i| {
            let p = rng.random_range(0.05..0.95);
            let dist = CostDistribution::two_point(
                rng.random_range(0.1..1.0),
                -rng.random_range(0.1..1.0),
                p,
            );
            TypeParams::new(
                i,
                rng.random_range(1..=20),
                rng.random_range(0.02..=1.0 / 3.0),
                dist,
            )
        })
        .collect();
    EnvConfig {
        horizon,
        arrival_rates: rates.into_iter().map(Schedule::from_pairs).collect(),
        capacity: Schedule::from_pairs(capacity),
        types,
        r_max: 1.0,
        sigma_max: 1.0,
        feature_bound: 1.0,
    }
}

/// Largest gap between the window solver and [`lp_oracle`] over `cases`
/// random tiny instances with `w <= 3`.
pub fn fluid_lp_worst_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let env = tiny_env(&mut rng);
        env.validate().unwrap();
        let w = rng.random_range(1..=3u64);
        let got = moderation_pipeline::solve_w_fluid(&env, w)
            .unwrap()
            .objective;
        worst = worst.max((got - lp_oracle(&env, w as usize)).abs());
    }
    worst
}
