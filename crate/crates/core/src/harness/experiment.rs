//! Replicated runs, regret aggregation and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::benchmark::{solve_w_fluid, FluidSolution};
use crate::error::{Error, Result};
use crate::model::EnvConfig;
use crate::policy::{build_with_fluid, ConfBounds, PolicySpec};
use crate::sim::{
    loss_decomposition, realized_loss, realized_loss_until, LossDecomposition, Simulation,
};

/// Everything kept from one (policy, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub x: Option<f64>,
    pub policy: String,
    pub seed: u64,
    pub loss: f64,
    /// Reviewed posts per type.
    pub reviewed: Vec<u64>,
    /// First period after which `h_lo > 0` held, per type (learning policies).
    pub certified_remove: Vec<Option<u64>>,
    pub decomposition: LossDecomposition,
    pub env_fingerprint: u64,
    #[serde(skip)]
    pub curves: Curves,
}

/// Trajectories sampled at the checkpoint periods.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curves {
    pub loss: Vec<f64>,
    pub reviewed: Vec<Vec<u64>>,
    pub queue: Vec<Vec<u32>>,
    pub confidence: Vec<Option<Vec<ConfBounds>>>,
}

/// Mean and standard error of a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub x: Option<f64>,
    pub policy: String,
    /// Window size (already resolved: `T` instead of 0).
    pub w: u64,
    pub fluid_objective: f64,
    pub regret: Estimate,
    pub loss: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: u64,
    pub value: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub x: Option<f64>,
    pub policy: String,
    pub decomposition: LossDecomposition,
    pub mean_reviewed: Vec<f64>,
    /// Share of replications that never reviewed a post of each type.
    pub zero_review_share: Vec<f64>,
    /// Share of replications whose bounds certified `h_k > 0`.
    pub certified_share: Vec<f64>,
    /// `Reg(1, t)` at the checkpoints.
    pub regret_curve: Vec<CurvePoint>,
    /// Per type, mean reviewed count at the checkpoints.
    pub reviewed_curve: Vec<Vec<CurvePoint>>,
    pub queue_curve: Vec<Vec<CurvePoint>>,
    /// Per type, `(h_lo, h_hi)` means at the checkpoints.
    pub confidence_curve: Vec<Vec<(CurvePoint, CurvePoint)>>,
}

/// Paired difference `regret(a) - regret(b)` at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub x: Option<f64>,
    pub label: String,
    pub gap: Estimate,
    /// Share of seeds with `regret(a) >= regret(b)`.
    pub share_nonnegative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<String>,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    pub rows: Vec<RegretRow>,
    pub diagnostics: Vec<Diagnostics>,
    pub gaps: Vec<GapRow>,
    pub runs: Vec<RunRecord>,
}

impl RegretReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, policy: &str, w: u64, x: Option<f64>) -> Option<&RegretRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.w == w && r.x == x)
    }

    pub fn diagnostics_for(&self, policy: &str, x: Option<f64>) -> Option<&Diagnostics> {
        self.diagnostics
            .iter()
            .find(|d| d.policy == policy && d.x == x)
    }

    pub fn runs_for<'a>(
        &'a self,
        policy: &'a str,
        x: Option<f64>,
    ) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.policy == policy && r.x == x)
    }

    pub fn policies(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for row in &self.rows {
            if !names.contains(&row.policy) {
                names.push(row.policy.clone());
            }
        }
        names
    }
}

/// Evenly spaced checkpoint periods ending at `T`.
pub fn checkpoint_periods(horizon: u64, count: u32) -> Vec<u64> {
    if horizon == 0 {
        return Vec::new();
    }
    let count = u64::from(count.max(1)).min(horizon);
    let mut points: Vec<u64> = (1..=count).map(|i| horizon * i / count).collect();
    points.dedup();
    points
}

/// Run one policy on one seed, sampling trajectories at `checkpoints`.
pub fn run_once(
    env: &EnvConfig,
    spec: &PolicySpec,
    fluid1: &FluidSolution,
    seed: u64,
    checkpoints: &[u64],
) -> Result<RunRecord> {
    let policy = build_with_fluid(spec, env, fluid1)?;
    let num_types = env.num_types();
    let mut sim = Simulation::new(env, policy, seed)?;
    let learning = num_types > 0 && sim.policy().confidence(0, 1).is_some();
    let mut certified = vec![None; num_types];
    let mut curves = Curves::default();
    let mut next = 0;
    while !sim.done() {
        let rec = sim.step()?;
        let t = rec.t;
        if learning {
            for (k, slot) in certified.iter_mut().enumerate() {
                if slot.is_none()
                    && sim
                        .policy()
                        .confidence(k, t + 1)
                        .is_some_and(|b| b.h_lo > 0.0)
                {
                    *slot = Some(t);
                }
            }
        }
        if checkpoints.get(next) == Some(&t) {
            curves.queue.push(rec.queue.clone());
            curves.confidence.push(if learning {
                Some(
                    (0..num_types)
                        .filter_map(|k| sim.policy().confidence(k, t + 1))
                        .collect(),
                )
            } else {
                None
            });
            curves
                .reviewed
                .push((0..num_types).map(|k| sim.state().reviewed(k)).collect());
            next += 1;
        }
    }
    let trace = sim.finish();
    curves.loss = checkpoints
        .iter()
        .map(|&t| realized_loss_until(&trace, t))
        .collect();
    Ok(RunRecord {
        x: None,
        policy: spec.display_name(),
        seed,
        loss: realized_loss(&trace),
        reviewed: (0..num_types)
            .map(|k| trace.reviewed_count(k) as u64)
            .collect(),
        certified_remove: certified,
        decomposition: loss_decomposition(&trace)?,
        env_fingerprint: trace.env_fingerprint(),
        curves,
    })
}

struct Point {
    x: Option<f64>,
    env: EnvConfig,
    fluids: Vec<FluidSolution>,
    fluid1: FluidSolution,
    checkpoints: Vec<u64>,
}

impl Point {
    fn new(scenario: &Scenario, x: Option<f64>) -> Result<Self> {
        let env = scenario.validate()?;
        let mut windows: Vec<u64> = scenario
            .windows
            .iter()
            .map(|&w| if w == 0 { env.horizon.max(1) } else { w })
            .collect();
        windows.dedup();
        let fluids = windows
            .iter()
            .map(|&w| solve_w_fluid(&env, w))
            .collect::<Result<Vec<_>>>()?;
        let fluid1 = solve_w_fluid(&env, 1)?;
        let checkpoints = checkpoint_periods(env.horizon, scenario.checkpoints);
        Ok(Self {
            x,
            env,
            fluids,
            fluid1,
            checkpoints,
        })
    }
}

/// Run every policy for every replication. Seeds are `base_seed + r`, shared
/// across policies so that they face the same realizations.
pub fn run_experiment(scenario: &Scenario) -> Result<RegretReport> {
    let point = Point::new(scenario, None)?;
    let horizon = point.env.horizon;
    let checkpoints = point.checkpoints.clone();
    let mut report = run_points(scenario, &[point])?;
    report.horizon = horizon;
    report.checkpoints = checkpoints;
    Ok(report)
}

/// One report row per value of `param`.
pub fn sweep(scenario: &Scenario, param: &str, values: &[f64]) -> Result<RegretReport> {
    let points = values
        .iter()
        .map(|&v| Point::new(&scenario.with_param(param, v)?, Some(v)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = run_points(scenario, &points)?;
    report.sweep_param = Some(param.to_string());
    if let Some(first) = points.first() {
        report.horizon = first.env.horizon;
        report.checkpoints = first.checkpoints.clone();
    }
    Ok(report)
}

fn run_points(scenario: &Scenario, points: &[Point]) -> Result<RegretReport> {
    let reps = u64::from(scenario.replications);
    let jobs: Vec<(usize, usize, u64)> = (0..points.len())
        .flat_map(|p| {
            (0..scenario.policies.len()).flat_map(move |i| (0..reps).map(move |r| (p, i, r)))
        })
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(p, i, r)| {
            let point = &points[p];
            let spec = &scenario.policies[i];
            let seed = scenario.base_seed.wrapping_add(r);
            run_once(&point.env, spec, &point.fluid1, seed, &point.checkpoints)
                .map(|mut rec| {
                    rec.x = point.x;
                    rec
                })
                .map_err(|e| Error::Run {
                    policy: spec.display_name(),
                    seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut gaps = Vec::new();
    for point in points {
        let horizon = point.env.horizon.max(1) as f64;
        for spec in &scenario.policies {
            let name = spec.display_name();
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.x == point.x && r.policy == name)
                .collect();
            let losses: Vec<f64> = group.iter().map(|r| r.loss).collect();
            for fluid in &point.fluids {
                let regrets: Vec<f64> = losses
                    .iter()
                    .map(|l| (l - fluid.objective) / horizon)
                    .collect();
                rows.push(RegretRow {
                    x: point.x,
                    policy: name.clone(),
                    w: fluid.w,
                    fluid_objective: fluid.objective,
                    regret: Estimate::of(&regrets),
                    loss: Estimate::of(&losses),
                });
            }
            diagnostics.push(summarize(point, &name, &group));
        }
        if let Some((a, b)) = &scenario.gap {
            let runs_a: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.x == point.x && &r.policy == a)
                .collect();
            let runs_b: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.x == point.x && &r.policy == b)
                .collect();
            if runs_a.is_empty() || runs_b.is_empty() {
                return Err(Error::Config(format!(
                    "gap policies `{a}` and `{b}` must both be in the scenario"
                )));
            }
            let diffs: Vec<f64> = runs_a
                .iter()
                .zip(&runs_b)
                .map(|(ra, rb)| (ra.loss - rb.loss) / horizon)
                .collect();
            let nonneg = diffs.iter().filter(|d| **d >= 0.0).count() as f64 / diffs.len() as f64;
            gaps.push(GapRow {
                x: point.x,
                label: format!("{a} - {b}"),
                gap: Estimate::of(&diffs),
                share_nonnegative: nonneg,
            });
        }
    }
    Ok(RegretReport {
        scenario: scenario.name.clone(),
        sweep_param: None,
        horizon: 0,
        checkpoints: Vec::new(),
        rows,
        diagnostics,
        gaps,
        runs,
    })
}

fn summarize(point: &Point, name: &str, group: &[&RunRecord]) -> Diagnostics {
    let n = group.len().max(1) as f64;
    let num_types = point.env.num_types();
    let mut decomposition = LossDecomposition::default();
    for r in group {
        decomposition.idiosyncrasy += r.decomposition.idiosyncrasy / n;
        decomposition.delay += r.decomposition.delay / n;
        decomposition.classification += r.decomposition.classification / n;
    }
    let share = |pred: &dyn Fn(&RunRecord, usize) -> bool, k: usize| {
        group.iter().filter(|r| pred(r, k)).count() as f64 / n
    };
    let mean_reviewed = (0..num_types)
        .map(|k| group.iter().map(|r| r.reviewed[k] as f64).sum::<f64>() / n)
        .collect();
    let zero_review_share = (0..num_types)
        .map(|k| share(&|r, k| r.reviewed[k] == 0, k))
        .collect();
    let certified_share = (0..num_types)
        .map(|k| share(&|r, k| r.certified_remove[k].is_some(), k))
        .collect();

    let at = |i: usize, f: &dyn Fn(&RunRecord) -> f64| -> CurvePoint {
        let values: Vec<f64> = group.iter().map(|r| f(r)).collect();
        CurvePoint {
            t: point.checkpoints[i],
            value: Estimate::of(&values),
        }
    };
    let cps = 0..point.checkpoints.len();
    let regret_curve = cps
        .clone()
        .map(|i| {
            let t = point.checkpoints[i];
            let bench = point.fluid1.windows[..t as usize]
                .iter()
                .map(window_loss(&point.fluid1))
                .sum::<f64>();
            at(i, &|r| (r.curves.loss[i] - bench) / t as f64)
        })
        .collect();
    let reviewed_curve = (0..num_types)
        .map(|k| {
            cps.clone()
                .map(|i| at(i, &|r| r.curves.reviewed[i][k] as f64))
                .collect()
        })
        .collect();
    let queue_curve = (0..num_types)
        .map(|k| {
            cps.clone()
                .map(|i| at(i, &|r| f64::from(r.curves.queue[i][k])))
                .collect()
        })
        .collect();
    let has_conf = group
        .first()
        .is_some_and(|r| r.curves.confidence.iter().any(Option::is_some));
    let confidence_curve = if has_conf {
        (0..num_types)
            .map(|k| {
                cps.clone()
                    .map(|i| {
                        let bound = |r: &RunRecord| {
                            r.curves.confidence[i]
                                .as_ref()
                                .map_or(f64::NAN, |c| c[k].h_lo)
                        };
                        let upper = |r: &RunRecord| {
                            r.curves.confidence[i]
                                .as_ref()
                                .map_or(f64::NAN, |c| c[k].h_hi)
                        };
                        (at(i, &bound), at(i, &upper))
                    })
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    Diagnostics {
        x: point.x,
        policy: name.to_string(),
        decomposition,
        mean_reviewed,
        zero_review_share,
        certified_share,
        regret_curve,
        reviewed_curve,
        queue_curve,
        confidence_curve,
    }
}

fn window_loss(fluid: &FluidSolution) -> impl Fn(&crate::benchmark::FluidWindow) -> f64 + '_ {
    move |win| {
        (0..fluid.num_types())
            .map(|k| fluid.values[k] * (win.arrivals[k] - win.admitted[k]))
            .sum()
    }
}
