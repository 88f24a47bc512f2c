//! Admission and scheduling policies.
//!
//! A policy sees the queueing state at the start of each period and returns
//! the classification and admission for the arriving post, then picks which
//! waiting post the reviewers work on. Learning policies receive each
//! revealed cost through [`Policy::on_review`].

pub mod contextual;
pub mod known;
pub mod learning;

use std::path::PathBuf;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::benchmark::{solve_w_fluid, FluidSolution};
use crate::error::{Error, Result};
use crate::model::{EnvConfig, TypeId};
use crate::sim::{Admission, PostId, Review, SimState};

pub use contextual::{Colbacid, GroupPartition, RidgeState};
pub use known::{AiOnly, Bacid, DynamicFluid, HumanOnly, StaticK, Threshold};
pub use learning::{BacidUcb, ConfBounds, Olbacid, TypeStats};

pub trait Policy {
    fn name(&self) -> &str;

    /// Classification and admission for this period's arrival. Called every
    /// period; with `arrival == None` the policy must not admit.
    fn admit(
        &mut self,
        state: &SimState,
        arrival: Option<TypeId>,
        rng: &mut dyn RngCore,
    ) -> Admission;

    /// Post to put in front of the reviewers, after this period's admission.
    fn schedule(&mut self, state: &SimState) -> Option<PostId>;

    /// A review completed and revealed `review.cost`.
    fn on_review(&mut self, _review: &Review) {}

    /// Current confidence bounds for type `k` at period `t`, for learning
    /// policies.
    fn confidence(&self, _k: TypeId, _t: u64) -> Option<ConfBounds> {
        None
    }

    /// Admission weight, when the policy has one.
    fn beta(&self) -> Option<f64> {
        None
    }

    /// Scheduling groups, when the policy aggregates types.
    fn groups(&self) -> Option<&GroupPartition> {
        None
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn admit(
        &mut self,
        state: &SimState,
        arrival: Option<TypeId>,
        rng: &mut dyn RngCore,
    ) -> Admission {
        (**self).admit(state, arrival, rng)
    }
    fn schedule(&mut self, state: &SimState) -> Option<PostId> {
        (**self).schedule(state)
    }
    fn on_review(&mut self, review: &Review) {
        (**self).on_review(review)
    }
    fn confidence(&self, k: TypeId, t: u64) -> Option<ConfBounds> {
        (**self).confidence(k, t)
    }
    fn beta(&self) -> Option<f64> {
        (**self).beta()
    }
    fn groups(&self) -> Option<&GroupPartition> {
        (**self).groups()
    }
}

/// Type maximizing `rates[k] * Q_k` among nonempty review queues; lowest
/// index wins ties.
pub fn maxweight_type(state: &SimState, rates: &[f64]) -> Option<TypeId> {
    let mut best: Option<(TypeId, f64)> = None;
    for (k, len) in state.queue_lens().enumerate() {
        if len == 0 {
            continue;
        }
        let score = rates[k] * len as f64;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    best.map(|(k, _)| k)
}

/// Head of the MaxWeight queue.
pub fn maxweight(state: &SimState, rates: &[f64]) -> Option<PostId> {
    maxweight_type(state, rates).and_then(|k| state.head(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    AiOnly,
    HumanOnly,
    Static,
    Dynamic,
    Bacid,
    BacidUcb,
    Olbacid,
    Colbacid,
    Threshold,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::AiOnly => "ai-only",
            PolicyKind::HumanOnly => "human-only",
            PolicyKind::Static => "static",
            PolicyKind::Dynamic => "dynamic",
            PolicyKind::Bacid => "bacid",
            PolicyKind::BacidUcb => "bacid-ucb",
            PolicyKind::Olbacid => "olbacid",
            PolicyKind::Colbacid => "colbacid",
            PolicyKind::Threshold => "threshold",
        }
    }

    /// Policies that ignore congestion when admitting.
    pub fn congestion_unaware(self) -> bool {
        matches!(
            self,
            PolicyKind::AiOnly | PolicyKind::HumanOnly | PolicyKind::Static | PolicyKind::Dynamic
        )
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Optional parameters; anything left out takes the policy's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// Window size used for BACID's window-aware admission weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    /// Admitted type for `static` (0-based).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<TypeId>,
    /// Queue threshold for `threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Explicit group id per type for `colbacid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<usize>>,
    /// JSON matrix with one feature row per type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_file: Option<PathBuf>,
    /// Types whose cost law `bacid-ucb` is told up front.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_types: Option<Vec<TypeId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: PolicyKind,
    #[serde(default)]
    pub params: PolicyParams,
    /// Display name in reports; defaults to the policy name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl PolicySpec {
    pub fn named(name: PolicyKind) -> Self {
        Self {
            name,
            params: PolicyParams::default(),
            label: None,
        }
    }

    pub fn with_params(name: PolicyKind, params: PolicyParams) -> Self {
        Self {
            name,
            params,
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn display_name(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        match (self.name, self.params.k, self.params.theta) {
            (PolicyKind::Static, Some(k), _) => format!("static-{}", k + 1),
            (PolicyKind::Threshold, _, Some(theta)) => format!("threshold-{theta}"),
            (kind, _, _) => kind.to_string(),
        }
    }

    /// Instantiate for `env`. Dynamic solves the 1-fluid benchmark itself.
    pub fn build(&self, env: &EnvConfig) -> Result<Box<dyn Policy>> {
        let p = &self.params;
        Ok(match self.name {
            PolicyKind::AiOnly => Box::new(AiOnly::new(env)?),
            PolicyKind::HumanOnly => Box::new(HumanOnly::new(env)?),
            PolicyKind::Static => {
                let k =
                    p.k.ok_or_else(|| Error::Config("static needs parameter `k`".into()))?;
                Box::new(StaticK::new(env, k)?)
            }
            PolicyKind::Dynamic => {
                let fluid = solve_w_fluid(env, 1)?;
                Box::new(DynamicFluid::new(env, Some(&fluid))?)
            }
            PolicyKind::Bacid => {
                let mut bacid = Bacid::new(env)?;
                if let Some(w) = p.window {
                    bacid = bacid.with_window(w);
                }
                if let Some(beta) = p.beta {
                    bacid = bacid.with_beta(beta)?;
                }
                Box::new(bacid)
            }
            PolicyKind::BacidUcb => {
                let mut ucb = BacidUcb::new(env)?;
                ucb.configure(p.beta, p.sigma_max, p.r_max)?;
                if let Some(known) = &p.known_types {
                    for &k in known {
                        ucb.know_type(env, k)?;
                    }
                }
                Box::new(ucb)
            }
            PolicyKind::Olbacid => {
                let mut ol = Olbacid::new(env)?;
                ol.configure(p.beta, p.gamma, p.sigma_max, p.r_max)?;
                Box::new(ol)
            }
            PolicyKind::Colbacid => {
                let features = match &p.features_file {
                    Some(path) => Some(load_features(path)?),
                    None => None,
                };
                let partition = match (&p.groups, p.zeta) {
                    (Some(groups), _) => GroupPartition::from_groups(env, groups)?,
                    (None, zeta) => GroupPartition::from_env(env, zeta.unwrap_or(1.0))?,
                };
                let config = contextual::ColbacidConfig {
                    beta: p.beta,
                    gamma: p.gamma,
                    delta: p.delta,
                    kappa: p.kappa,
                    sigma_max: p.sigma_max,
                    r_max: p.r_max,
                    features,
                };
                Box::new(Colbacid::new(env, partition, config)?)
            }
            PolicyKind::Threshold => {
                let theta = p
                    .theta
                    .ok_or_else(|| Error::Config("threshold needs parameter `theta`".into()))?;
                Box::new(Threshold::new(env, theta)?)
            }
        })
    }
}

/// Build a policy and keep the fluid solution it was given (for Dynamic).
pub fn build_with_fluid(
    spec: &PolicySpec,
    env: &EnvConfig,
    fluid: &FluidSolution,
) -> Result<Box<dyn Policy>> {
    if spec.name == PolicyKind::Dynamic {
        return Ok(Box::new(DynamicFluid::new(env, Some(fluid))?));
    }
    spec.build(env)
}

fn load_features(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
