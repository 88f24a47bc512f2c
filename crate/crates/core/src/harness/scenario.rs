//! Scenario files: an environment (explicit or generated), the policies to
//! compare, benchmark windows and replication settings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmark::threshold_instance;
use crate::error::{Error, Result};
use crate::model::{CostDistribution, EnvConfig, Schedule, TypeParams};
use crate::policy::PolicySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// One type, `lambda = 1`, `mu = 1/2`, costs `+-1`.
    SingleType,
    /// Arrivals and capacity in disjoint time blocks.
    DisjointBlocks,
    /// Two normal-cost types with a high/low capacity duty cycle.
    DutyCycle,
    /// Texts then videos; videos are mostly harmful.
    TextVideo,
    /// Same as `text_video` with the slower video arrival rate.
    RareVideo,
    /// Balking Geo/Geo/1 instance for threshold policies.
    Threshold,
}

/// Generator knobs. Anything unset takes the generator's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime_1: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime_2: Option<u64>,
    /// `l_2 / l_1`; overrides `lifetime_2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Last period with type-1-only arrivals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_period: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_2: Option<f64>,
    /// Capacity cycle length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<u64>,
    /// Periods at high capacity at the start of each cycle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_periods: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub generator: GeneratorKind,
    #[serde(default)]
    pub params: GeneratorParams,
}

impl Generator {
    pub fn new(generator: GeneratorKind) -> Self {
        Self {
            generator,
            params: GeneratorParams::default(),
        }
    }

    pub fn build(&self) -> Result<EnvConfig> {
        let p = &self.params;
        match self.generator {
            GeneratorKind::SingleType => Ok(single_type(
                p.lifetime.unwrap_or(100),
                p.horizon.unwrap_or(2100),
            )),
            GeneratorKind::DisjointBlocks => {
                disjoint_blocks(p.lifetime.unwrap_or(20), p.horizon.unwrap_or(200))
            }
            GeneratorKind::DutyCycle => duty_cycle(
                p.lifetime.unwrap_or(100),
                p.horizon.unwrap_or(50_000),
                p.block.unwrap_or(500),
                p.high_periods.unwrap_or(400),
            ),
            GeneratorKind::TextVideo | GeneratorKind::RareVideo => {
                let (r1, r2) = if self.generator == GeneratorKind::TextVideo {
                    (0.6, 0.4)
                } else {
                    (5.0 / 6.0, 1.0 / 6.0)
                };
                let l1 = p.lifetime_1.unwrap_or(1000);
                let l2 = match p.ratio {
                    Some(ratio) => ((ratio * l1 as f64).round() as u64).max(1),
                    None => p.lifetime_2.unwrap_or(100),
                };
                Ok(text_video(
                    l1,
                    l2,
                    p.horizon.unwrap_or(10_000),
                    p.switch_period.unwrap_or(500),
                    p.rate_1.unwrap_or(r1),
                    p.rate_2.unwrap_or(r2),
                ))
            }
            GeneratorKind::Threshold => Ok(threshold_instance(
                p.lifetime.unwrap_or(100),
                p.horizon.unwrap_or(1_000_000),
            )),
        }
    }

    /// Set one named knob (used by sweeps).
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let p = &mut self.params;
        let as_count = || -> Result<u64> {
            if value.is_finite() && value >= 0.0 && value.fract() == 0.0 {
                Ok(value as u64)
            } else {
                Err(Error::Config(format!(
                    "`{name}` needs a nonnegative integer, got {value}"
                )))
            }
        };
        match name {
            "lifetime" => match self.generator {
                GeneratorKind::TextVideo | GeneratorKind::RareVideo => {
                    p.lifetime_1 = Some(as_count()?)
                }
                _ => p.lifetime = Some(as_count()?),
            },
            "lifetime_1" => p.lifetime_1 = Some(as_count()?),
            "lifetime_2" => p.lifetime_2 = Some(as_count()?),
            "ratio" => p.ratio = Some(value),
            "horizon" => p.horizon = Some(as_count()?),
            "switch_period" => p.switch_period = Some(as_count()?),
            "rate_1" => p.rate_1 = Some(value),
            "rate_2" => p.rate_2 = Some(value),
            "block" => p.block = Some(as_count()?),
            "high_periods" => p.high_periods = Some(as_count()?),
            _ => return Err(Error::Config(format!("unknown sweep parameter `{name}`"))),
        }
        Ok(())
    }
}

pub fn single_type(lifetime: u64, horizon: u64) -> EnvConfig {
    EnvConfig {
        horizon,
        arrival_rates: vec![Schedule::constant(1.0)],
        capacity: Schedule::constant(1),
        types: vec![TypeParams::new(
            0,
            lifetime,
            0.5,
            CostDistribution::signed_unit(0.5),
        )],
        r_max: 1.0,
        sigma_max: 1.0,
        feature_bound: 1.0,
    }
}

/// Arrivals while `t <= (T - l) / 2`, reviewers from `t >= (T + l) / 2`,
/// nothing in between. Costs `+-2` so that `r = 1`; `mu = 1` so the late
/// capacity covers every arrival in aggregate.
pub fn disjoint_blocks(lifetime: u64, horizon: u64) -> Result<EnvConfig> {
    if horizon <= lifetime || !(horizon - lifetime).is_multiple_of(2) {
        return Err(Error::Config(
            "disjoint_blocks needs T > l with T - l even".into(),
        ));
    }
    let arrivals_end = (horizon - lifetime) / 2;
    let capacity_start = (horizon + lifetime) / 2;
    Ok(EnvConfig {
        horizon,
        arrival_rates: vec![Schedule::from_pairs([(1, 1.0), (arrivals_end + 1, 0.0)])],
        capacity: Schedule::from_pairs([(1, 0), (capacity_start, 1)]),
        types: vec![TypeParams::new(
            0,
            lifetime,
            1.0,
            CostDistribution::two_point(2.0, -2.0, 0.5),
        )],
        r_max: 2.0,
        sigma_max: 2.0,
        feature_bound: 1.0,
    })
}

/// Two types with `lambda = (0.2, 0.4)`, `mu = 0.05`, costs
/// `Normal(-1, 1)` and `Normal(0.1, 1)`, and `N(t)` at 9 for the first
/// `high` periods of every `block` and 2 for the rest.
pub fn duty_cycle(lifetime: u64, horizon: u64, block: u64, high: u64) -> Result<EnvConfig> {
    if block == 0 || high > block {
        return Err(Error::Config(
            "duty_cycle needs 0 < block and high_periods <= block".into(),
        ));
    }
    let mut pairs = Vec::new();
    let mut start = 1;
    while start <= horizon.max(1) {
        pairs.push((start, 9));
        if high < block {
            pairs.push((start + high, 2));
        }
        start += block;
    }
    pairs.retain(|&(t, _)| t <= horizon.max(1));
    pairs.dedup_by_key(|p| p.0);
    Ok(EnvConfig {
        horizon,
        arrival_rates: vec![Schedule::constant(0.2), Schedule::constant(0.4)],
        capacity: Schedule::from_pairs(pairs),
        types: vec![
            TypeParams::new(0, lifetime, 0.05, CostDistribution::normal(-1.0, 1.0)),
            TypeParams::new(1, lifetime, 0.05, CostDistribution::normal(0.1, 1.0)),
        ],
        // E|c| of Normal(-1, 1) is about 1.17, so r_max = 1 would be invalid.
        r_max: 2.0,
        sigma_max: 1.0,
        feature_bound: 1.0,
    })
}

/// Text posts (`+-1` equiprobable) alone until `switch`, then texts and
/// videos (`+1` w.p. 0.95) at rates `rate_1`, `rate_2`. `mu = 1/2`, `N = 1`.
pub fn text_video(
    l1: u64,
    l2: u64,
    horizon: u64,
    switch: u64,
    rate_1: f64,
    rate_2: f64,
) -> EnvConfig {
    EnvConfig {
        horizon,
        arrival_rates: vec![
            Schedule::from_pairs([(1, 1.0), (switch + 1, rate_1)]),
            Schedule::from_pairs([(1, 0.0), (switch + 1, rate_2)]),
        ],
        capacity: Schedule::constant(1),
        types: vec![
            TypeParams::new(0, l1, 0.5, CostDistribution::signed_unit(0.5)),
            TypeParams::new(1, l2, 0.5, CostDistribution::signed_unit(0.95)),
        ],
        r_max: 1.0,
        sigma_max: 1.0,
        feature_bound: 1.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSpec {
    Generated(Generator),
    Explicit(Box<EnvConfig>),
}

impl EnvSpec {
    pub fn build(&self) -> Result<EnvConfig> {
        let env = match self {
            EnvSpec::Generated(g) => g.build()?,
            EnvSpec::Explicit(env) => (**env).clone(),
        };
        env.validate()?;
        Ok(env)
    }
}

fn default_windows() -> Vec<u64> {
    vec![1]
}

fn default_reps() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub env: EnvSpec,
    pub policies: Vec<PolicySpec>,
    /// Benchmark window sizes; `0` stands for the horizon `T`.
    #[serde(default = "default_windows")]
    pub windows: Vec<u64>,
    #[serde(default = "default_reps")]
    pub replications: u32,
    #[serde(default)]
    pub base_seed: u64,
    /// Evenly spaced periods at which trajectories are sampled.
    #[serde(default)]
    pub checkpoints: u32,
    /// Output file stem per figure kind (`regret_curve`, `sweep`, `gap`,
    /// `reviewed`, `confidence`, `queue`).
    #[serde(default)]
    pub figures: BTreeMap<String, String>,
    /// Policy pair `(a, b)` whose paired regret difference `a - b` is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<(String, String)>,
    /// Pilot-calibrated thresholds used by acceptance checks.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expectations: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        Ok(scenario)
    }

    /// Resolve the environment and instantiate every policy once.
    pub fn validate(&self) -> Result<EnvConfig> {
        let env = self.env.build()?;
        if self.policies.is_empty() {
            return Err(Error::Config(format!(
                "scenario `{}` lists no policies",
                self.name
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let fluid = crate::benchmark::solve_w_fluid(&env, 1)?;
        for spec in &self.policies {
            crate::policy::build_with_fluid(spec, &env, &fluid)?;
        }
        Ok(env)
    }

    /// Copy with one generator knob changed.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Scenario> {
        let mut out = self.clone();
        match &mut out.env {
            EnvSpec::Generated(g) => g.set(name, value)?,
            EnvSpec::Explicit(env) if name == "horizon" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "horizon must be a nonnegative integer, got {value}"
                    )));
                }
                env.horizon = value as u64;
            }
            EnvSpec::Explicit(_) => {
                return Err(Error::Config(format!(
                    "`{name}` can only be swept on a generated environment"
                )))
            }
        }
        Ok(out)
    }

    pub fn figure_name(&self, kind: &str) -> String {
        self.figures
            .get(kind)
            .cloned()
            .unwrap_or_else(|| format!("{}_{kind}", self.name))
    }
}

const PRESETS: &[(&str, &str)] = &[
    (
        "single_type",
        include_str!("../../presets/single_type.json"),
    ),
    (
        "disjoint_blocks",
        include_str!("../../presets/disjoint_blocks.json"),
    ),
    ("duty_cycle", include_str!("../../presets/duty_cycle.json")),
    ("text_video", include_str!("../../presets/text_video.json")),
    ("rare_video", include_str!("../../presets/rare_video.json")),
    ("threshold", include_str!("../../presets/threshold.json")),
    ("contextual", include_str!("../../presets/contextual.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<Scenario> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset `{name}` (known: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    Scenario::from_json(text)
}

/// A scenario file path, or else a preset name.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    } else {
        preset(arg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn disjoint_blocks_shape() {
        let env = disjoint_blocks(20, 200).unwrap();
        assert_eq!(env.arrival_rate(0, 90), 1.0);
        assert_eq!(env.arrival_rate(0, 91), 0.0);
        assert_eq!(env.capacity_at(109), 0);
        assert_eq!(env.capacity_at(110), 1);
        assert!(disjoint_blocks(20, 201).is_err());
    }

    #[test]
    fn duty_cycle_duty_cycle() {
        let env = duty_cycle(100, 50_000, 500, 400).unwrap();
        assert_eq!(env.capacity_at(400), 9);
        assert_eq!(env.capacity_at(401), 2);
        assert_eq!(env.capacity_at(501), 9);
        assert_eq!(env.capacity_at(50_000), 2);
        env.validate().unwrap();
    }

    #[test]
    fn sweep_knobs() {
        let s = preset("text_video").unwrap();
        let r = s.with_param("ratio", 0.05).unwrap();
        assert_eq!(r.env.build().unwrap().types[1].lifetime, 50);
        assert!(s.with_param("colour", 1.0).is_err());
        assert!(s.with_param("lifetime", 2.5).is_err());
    }

    #[test]
    fn explicit_env_roundtrip() {
        let s = Scenario {
            name: "x".into(),
            description: String::new(),
            env: EnvSpec::Explicit(Box::new(single_type(10, 50))),
            policies: vec![PolicySpec::named(crate::policy::PolicyKind::Bacid)],
            windows: vec![1, 0],
            replications: 2,
            base_seed: 3,
            checkpoints: 0,
            figures: BTreeMap::new(),
            gap: None,
            expectations: BTreeMap::new(),
        };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&json).unwrap(), s);
    }
}
