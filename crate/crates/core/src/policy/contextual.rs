//! Contextual learning with ridge regression over type features, plus
//! service-rate aggregation of types into scheduling groups.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::known::default_beta;
use super::learning::ConfBounds;
use super::{check_positive, Policy};
use crate::error::{Error, Result};
use crate::model::{Class, EnvConfig, TypeId};
use crate::sim::{Admission, PostId, Review, SimState};

/// Rank-one updates between full re-solves of the inverse.
const RESOLVE_EVERY: u64 = 1024;

/// Ridge estimates of the keep-cost and remove-cost parameters.
///
/// The design matrix is shared: `V = kappa I + sum phi phi^T`. The positive
/// parts `c+` and negative parts `c-` are regressed separately; the
/// remove-cost parameter is the negation of the `c-` fit, so that
/// `phi^T theta_remove` estimates `E[-c-] >= 0` directly.
#[derive(Clone, Debug)]
pub struct RidgeState {
    kappa: f64,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    b_pos: DVector<f64>,
    b_neg: DVector<f64>,
    theta_keep: DVector<f64>,
    theta_neg: DVector<f64>,
    count: u64,
}

impl RidgeState {
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        check_positive("kappa", kappa)?;
        Ok(Self {
            kappa,
            v: DMatrix::identity(dim, dim) * kappa,
            v_inv: DMatrix::identity(dim, dim) / kappa,
            b_pos: DVector::zeros(dim),
            b_neg: DVector::zeros(dim),
            theta_keep: DVector::zeros(dim),
            theta_neg: DVector::zeros(dim),
            count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b_pos.len()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Number of reviewed posts absorbed so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    pub fn theta_keep(&self) -> &DVector<f64> {
        &self.theta_keep
    }

    /// Fit of the `c-` column (estimates `E[c-] <= 0`).
    pub fn theta_neg(&self) -> &DVector<f64> {
        &self.theta_neg
    }

    /// Remove-cost parameter, the negated `c-` fit.
    pub fn theta_remove(&self) -> DVector<f64> {
        -&self.theta_neg
    }

    /// `theta_keep - theta_remove`.
    pub fn theta_h(&self) -> DVector<f64> {
        &self.theta_keep + &self.theta_neg
    }

    pub fn update(&mut self, phi: &DVector<f64>, cost: f64) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::Config(format!(
                "feature has dimension {}, expected {}",
                phi.len(),
                self.dim()
            )));
        }
        if !cost.is_finite() || phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("ridge update".into()));
        }
        self.v += phi * phi.transpose();
        self.b_pos += phi * cost.max(0.0);
        self.b_neg += phi * cost.min(0.0);
        self.count += 1;
        if self.count.is_multiple_of(RESOLVE_EVERY) {
            self.resolve();
        } else {
            let v_phi = &self.v_inv * phi;
            let denom = 1.0 + phi.dot(&v_phi);
            self.v_inv -= (&v_phi * v_phi.transpose()) / denom;
            self.refit();
        }
        Ok(())
    }

    /// Recompute the inverse from scratch and refit.
    pub fn resolve(&mut self) {
        let inv = self
            .v
            .clone()
            .cholesky()
            .expect("ridge Gram matrix is positive definite")
            .inverse();
        self.v_inv = inv;
        self.refit();
    }

    fn refit(&mut self) {
        self.theta_keep = &self.v_inv * &self.b_pos;
        self.theta_neg = &self.v_inv * &self.b_neg;
    }

    /// `sqrt(phi^T V^-1 phi)`.
    pub fn weighted_norm(&self, phi: &DVector<f64>) -> f64 {
        phi.dot(&(&self.v_inv * phi)).max(0.0).sqrt()
    }
}

/// Confidence radius after `count` reviewed posts.
pub fn b_delta(count: u64, dim: usize, u: f64, kappa: f64, sigma_max: f64, delta: f64) -> f64 {
    let growth = 1.0 + count as f64 * u * u / kappa;
    sigma_max * (2.0 * dim as f64 * (growth / delta).ln()).max(0.0).sqrt() + kappa.sqrt() * u
}

/// Confidence bounds for feature `phi` from the two ridge ellipsoids of
/// radius `b`.
///
/// The keep and remove parameters range over independent ellipsoids, so the
/// difference has radius `2b`, and the max of `min(f, g)` over the product is
/// the min of the two separate maxima, each `center + b * ||phi||`.
pub fn contextual_conf(
    ridge: &RidgeState,
    phi: &DVector<f64>,
    b: f64,
    r_max: f64,
) -> Result<ConfBounds> {
    if b.is_nan() || b < 0.0 {
        return Err(Error::Config(format!(
            "confidence radius must be nonnegative, got {b}"
        )));
    }
    let w = ridge.weighted_norm(phi);
    let keep = phi.dot(ridge.theta_keep());
    let remove = -phi.dot(ridge.theta_neg());
    let h_hat = keep - remove;
    Ok(ConfBounds {
        h_lo: (h_hat - 2.0 * b * w).max(-r_max),
        h_hi: (h_hat + 2.0 * b * w).min(r_max),
        r_bar: (keep.min(remove) + b * w).clamp(0.0, r_max),
    })
}

/// Types grouped by scaled service rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    /// Group index of each type.
    pub group_of: Vec<usize>,
    pub members: Vec<Vec<TypeId>>,
    /// Minimum member service rate of each group.
    pub proxy_rates: Vec<f64>,
    /// Largest `N_max * (mu_k - proxy)` over all types.
    pub gap: f64,
}

impl GroupPartition {
    fn from_assignment(rates: &[f64], labels: &[usize], n_max: f64) -> Self {
        let mut distinct: Vec<usize> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let group_of: Vec<usize> = labels
            .iter()
            .map(|l| distinct.binary_search(l).expect("label present"))
            .collect();
        let mut members = vec![Vec::new(); distinct.len()];
        for (k, &g) in group_of.iter().enumerate() {
            members[g].push(k);
        }
        let proxy_rates: Vec<f64> = members
            .iter()
            .map(|m| m.iter().map(|&k| rates[k]).fold(f64::INFINITY, f64::min))
            .collect();
        let gap = group_of
            .iter()
            .enumerate()
            .map(|(k, &g)| n_max * (rates[k] - proxy_rates[g]))
            .fold(0.0, f64::max);
        Self {
            group_of,
            members,
            proxy_rates,
            gap,
        }
    }

    /// Groups from intervals `(0, zeta], (zeta, 2 zeta], ...` of `n_max * mu_k`.
    pub fn make(rates: &[f64], zeta: f64, n_max: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::Config(format!(
                "zeta must lie in (0, 1], got {zeta}"
            )));
        }
        let labels: Vec<usize> = rates
            .iter()
            .map(|&mu| {
                let q = n_max * mu / zeta;
                // Guard against q landing a hair above an interval edge.
                ((q - 1e-9).ceil().max(1.0) - 1.0) as usize
            })
            .collect();
        Ok(Self::from_assignment(rates, &labels, n_max))
    }

    pub fn from_env(env: &EnvConfig, zeta: f64) -> Result<Self> {
        let rates: Vec<f64> = env.types.iter().map(|p| p.service_rate).collect();
        Self::make(&rates, zeta, f64::from(env.max_capacity()))
    }

    /// Explicit group label per type.
    pub fn from_groups(env: &EnvConfig, labels: &[usize]) -> Result<Self> {
        if labels.len() != env.num_types() {
            return Err(Error::Config(format!(
                "{} group labels for {} types",
                labels.len(),
                env.num_types()
            )));
        }
        let rates: Vec<f64> = env.types.iter().map(|p| p.service_rate).collect();
        Ok(Self::from_assignment(
            &rates,
            labels,
            f64::from(env.max_capacity()),
        ))
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    /// Review-queue length of group `g`.
    pub fn queue_len(&self, state: &SimState, g: usize) -> usize {
        self.members[g].iter().map(|&k| state.queue_len(k)).sum()
    }
}

/// Optional overrides for [`Colbacid`].
#[derive(Clone, Debug, Default)]
pub struct ColbacidConfig {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub sigma_max: Option<f64>,
    pub r_max: Option<f64>,
    /// One feature row per type; the env's features otherwise.
    pub features: Option<Vec<Vec<f64>>>,
}

/// Label-driven and optimistic admission from contextual bounds, with
/// group-level MaxWeight and first-come-first-served order inside a group.
#[derive(Clone, Debug)]
pub struct Colbacid {
    ridge: RidgeState,
    features: Vec<DVector<f64>>,
    partition: GroupPartition,
    lifetimes: Vec<u64>,
    beta: f64,
    gamma: f64,
    delta: f64,
    u: f64,
    sigma_max: f64,
    r_max: f64,
}

impl Colbacid {
    pub fn new(env: &EnvConfig, partition: GroupPartition, config: ColbacidConfig) -> Result<Self> {
        let k = env.num_types();
        if partition.group_of.len() != k {
            return Err(Error::Config(format!(
                "partition covers {} types but the environment has {k}",
                partition.group_of.len()
            )));
        }
        let rows: Vec<Vec<f64>> = match config.features {
            Some(rows) => rows,
            None => (0..k).map(|t| env.feature(t)).collect(),
        };
        if rows.len() != k {
            return Err(Error::Config(format!(
                "{} feature rows for {k} types",
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let u = env.feature_bound;
        for (t, row) in rows.iter().enumerate() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if row.len() != dim || !norm.is_finite() || norm > u * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "feature of type {t} must have dimension {dim} and norm at most {u}"
                )));
            }
        }
        let default = default_beta(partition.num_groups(), env.max_lifetime());
        let beta = check_positive("beta", config.beta.unwrap_or(default))?;
        let gamma = check_positive("gamma", config.gamma.unwrap_or(default))?;
        let delta = config
            .delta
            .unwrap_or_else(|| gamma.min(0.5 / env.horizon.max(1) as f64));
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        let kappa = config.kappa.unwrap_or_else(|| (u * u).max(1.0));
        Ok(Self {
            ridge: RidgeState::new(dim, kappa)?,
            features: rows.into_iter().map(DVector::from_vec).collect(),
            partition,
            lifetimes: env.types.iter().map(|p| p.lifetime).collect(),
            beta,
            gamma,
            delta,
            u,
            sigma_max: check_positive("sigma_max", config.sigma_max.unwrap_or(env.sigma_max))?,
            r_max: check_positive("r_max", config.r_max.unwrap_or(env.r_max))?,
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn radius(&self) -> f64 {
        b_delta(
            self.ridge.count(),
            self.ridge.dim(),
            self.u,
            self.ridge.kappa(),
            self.sigma_max,
            self.delta,
        )
    }

    fn bounds(&self, k: TypeId) -> ConfBounds {
        contextual_conf(&self.ridge, &self.features[k], self.radius(), self.r_max)
            .expect("radius is nonnegative")
    }

    /// Group maximizing `proxy_rate * group queue`, lowest index on ties.
    pub fn maxweight_group(&self, state: &SimState) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..self.partition.num_groups() {
            let len = self.partition.queue_len(state, g);
            if len == 0 {
                continue;
            }
            let score = self.partition.proxy_rates[g] * len as f64;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((g, score));
            }
        }
        best.map(|(g, _)| g)
    }
}

/// Earliest-admitted post waiting in any member queue of `members`.
/// Post ids increase with admission order, so this is the group FIFO head.
pub fn group_head(state: &SimState, members: &[TypeId]) -> Option<PostId> {
    members.iter().filter_map(|&k| state.head(k)).min()
}

impl Policy for Colbacid {
    fn name(&self) -> &str {
        "colbacid"
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
        let phi = &self.features[k];
        let class = Class::from_mean_estimate(phi.dot(&self.ridge.theta_h()));
        let bounds = self.bounds(k);
        if bounds.uncertain(self.gamma) && state.label_driven().is_none() {
            return Admission::label_driven(class);
        }
        let group_len = self.partition.queue_len(state, self.partition.group_of[k]);
        let admit = self.beta * bounds.r_bar * self.lifetimes[k] as f64 >= group_len as f64;
        Admission::review(class, admit)
    }

    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        if let Some(id) = state.label_driven() {
            return Some(id);
        }
        let g = self.maxweight_group(state)?;
        group_head(state, &self.partition.members[g])
    }

    fn on_review(&mut self, review: &Review) {
        let phi = self.features[review.type_id].clone();
        self.ridge
            .update(&phi, review.cost)
            .expect("features and revealed costs are finite");
    }

    fn confidence(&self, k: TypeId, _t: u64) -> Option<ConfBounds> {
        Some(self.bounds(k))
    }

    fn beta(&self) -> Option<f64> {
        Some(self.beta)
    }

    fn groups(&self) -> Option<&GroupPartition> {
        Some(&self.partition)
    }
}
