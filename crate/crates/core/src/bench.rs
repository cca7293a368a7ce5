//! Regret, the theoretical regret bound, and a multi-seed experiment runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{chc_policy, exact_opt_dp, pseudo_opt, rhc_policy, sopt_policy, DpBudget};
use crate::error::{Error, Result};
use crate::model::{ArrivalTrace, CostModel};
use crate::policy::{run_rosc, RoscConfig};
use crate::record::RunRecord;
use crate::workloads::{GeneratorParams, PredictionOracle};

/// `C(policy) − C(reference)`; negative when the reference is only approximate.
pub fn regret(policy_cost: f64, reference_cost: f64) -> f64 {
    policy_cost - reference_cost
}

/// The three terms of the regret bound and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    /// `(6√(2M)β*(α+3β*)/(αW) + 3β*N)·√(H_T·T)`.
    pub gradient_term: f64,
    /// `(αU + 6β*N)·T/K`.
    pub rounding_term: f64,
    /// `2β*·H_T`.
    pub path_term: f64,
    pub total: f64,
}

/// Regret bound of the policy run with `γ = √(H_T/T)` and `η = γ/(12β*)`.
pub fn regret_bound(
    cost: &CostModel,
    services: usize,
    horizon: usize,
    volume: f64,
    paths: u32,
    window: usize,
    path_length: f64,
) -> Result<RegretBound> {
    if window == 0 {
        return Err(Error::invalid("the bound is undefined for W = 0"));
    }
    if paths == 0 {
        return Err(Error::invalid("the bound needs K >= 1"));
    }
    let (alpha, beta, m) = (cost.alpha, cost.beta_star(), cost.capacity as f64);
    let (n, t, w, k) = (services as f64, horizon as f64, window as f64, f64::from(paths));
    let gradient_term = (6.0 * (2.0 * m).sqrt() * beta * (alpha + 3.0 * beta) / (alpha * w)
        + 3.0 * beta * n)
        * (path_length * t).sqrt();
    let rounding_term = (alpha * volume + 6.0 * beta * n) * t / k;
    let path_term = 2.0 * beta * path_length;
    Ok(RegretBound {
        gradient_term,
        rounding_term,
        path_term,
        total: gradient_term + rounding_term + path_term,
    })
}

/// Every policy the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "rosc")]
    Rosc,
    #[serde(rename = "rhc")]
    Rhc,
    #[serde(rename = "chc")]
    Chc,
    #[serde(rename = "sopt")]
    Sopt,
    #[serde(rename = "opt-dp")]
    OptDp,
    #[serde(rename = "pseudo-opt")]
    PseudoOpt,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Rosc,
        PolicyKind::Rhc,
        PolicyKind::Chc,
        PolicyKind::Sopt,
        PolicyKind::OptDp,
        PolicyKind::PseudoOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Rosc => "rosc",
            PolicyKind::Rhc => "rhc",
            PolicyKind::Chc => "chc",
            PolicyKind::Sopt => "sopt",
            PolicyKind::OptDp => "opt-dp",
            PolicyKind::PseudoOpt => "pseudo-opt",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown policy {s:?}")))
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of a single policy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub alpha: f64,
    /// `β*/α`; every service gets `β = ratio·α`.
    pub ratio: f64,
    pub capacity: usize,
    pub window: usize,
    pub paths: u32,
    pub gamma: f64,
    /// Prediction noise weight `R` seen by the online policy.
    pub noise: f64,
    /// Whether RHC and CHC also see the noisy predictions.
    pub noisy_baselines: bool,
    pub pseudo_iterations: usize,
    pub dp_budget: DpBudget,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            ratio: 200.0,
            capacity: 10,
            window: 10,
            paths: 100,
            gamma: 0.05,
            noise: 0.0,
            noisy_baselines: false,
            pseudo_iterations: crate::baselines::PSEUDO_OPT_ITERATIONS,
            dp_budget: DpBudget::default(),
        }
    }
}

impl RunParams {
    pub fn cost(&self, services: usize) -> Result<CostModel> {
        CostModel::uniform(self.alpha, self.ratio * self.alpha, services, self.capacity, self.gamma)
    }

    fn set(&mut self, axis: Axis, value: f64) -> Result<()> {
        let whole = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::invalid(format!("axis {} needs whole numbers, got {value}", axis.name())))
            }
        };
        match axis {
            Axis::Ratio => self.ratio = value,
            Axis::M => self.capacity = whole()?,
            Axis::W => self.window = whole()?,
            Axis::R => self.noise = value,
            Axis::K => self.paths = whole()? as u32,
        }
        Ok(())
    }
}

/// Runs `kind` on `trace` with a shared prediction noise draw.
pub fn run_policy(kind: PolicyKind, trace: &ArrivalTrace, params: &RunParams, seed: u64) -> Result<RunRecord> {
    let cost = params.cost(trace.services())?;
    let exact = PredictionOracle::exact(trace);
    let noisy = PredictionOracle::noisy(trace, params.noise, params.window, seed)?;
    let baseline_oracle = if params.noisy_baselines { &noisy } else { &exact };
    match kind {
        PolicyKind::Rosc => {
            let cfg = RoscConfig::new(cost, params.window, params.paths, seed);
            run_rosc(trace, &noisy, &cfg)
        }
        PolicyKind::Rhc => rhc_policy(baseline_oracle, &cost, params.window.max(1)),
        PolicyKind::Chc => chc_policy(baseline_oracle, &cost, params.window.max(1)),
        PolicyKind::Sopt => sopt_policy(trace, &cost),
        PolicyKind::OptDp => exact_opt_dp(trace, &cost, params.dp_budget),
        PolicyKind::PseudoOpt => pseudo_opt(trace, &cost, params.pseudo_iterations),
    }
    .map(|mut rec| {
        rec.seed = seed;
        rec
    })
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "ratio")]
    Ratio,
    M,
    W,
    R,
    K,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Ratio => "ratio",
            Axis::M => "M",
            Axis::W => "W",
            Axis::R => "R",
            Axis::K => "K",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio" => Ok(Axis::Ratio),
            "M" | "m" => Ok(Axis::M),
            "W" | "w" => Ok(Axis::W),
            "R" | "r" => Ok(Axis::R),
            "K" | "k" => Ok(Axis::K),
            _ => Err(Error::invalid(format!("unknown sweep axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// A set of sweeps sharing one workload, seed list and policy list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub workload: GeneratorParams,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    pub base: RunParams,
    pub sweeps: Vec<Sweep>,
    /// Worker threads; `1` keeps runtime measurements free of contention.
    pub jobs: usize,
    /// Write every run's per-slot cost CSV under `runs/`.
    pub write_runs: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("experiment needs at least one seed"));
        }
        if self.policies.is_empty() {
            return Err(Error::invalid("experiment needs at least one policy"));
        }
        if self.sweeps.iter().any(|s| s.values.is_empty()) {
            return Err(Error::invalid("sweep axis without values"));
        }
        Ok(())
    }

    /// Sweep points `(axis, value, params)`; a spec without sweeps has the
    /// single point of its base parameters.
    pub fn points(&self) -> Result<Vec<(Option<Axis>, f64, RunParams)>> {
        if self.sweeps.is_empty() {
            return Ok(vec![(None, 0.0, self.base.clone())]);
        }
        let mut out = Vec::new();
        for sweep in &self.sweeps {
            for &v in &sweep.values {
                let mut p = self.base.clone();
                p.set(sweep.axis, v)?;
                out.push((Some(sweep.axis), v, p));
            }
        }
        Ok(out)
    }
}

/// Seed-aggregated result of one policy at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub axis: Option<Axis>,
    pub value: f64,
    pub policy: PolicyKind,
    pub seeds: usize,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_cost_per_slot: f64,
    pub mean_runtime_ms: f64,
    pub std_runtime_ms: f64,
    pub mean_runtime_per_slot_ms: f64,
    pub costs: Vec<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
}

impl ExperimentReport {
    pub fn failed(&self) -> bool {
        self.points.iter().any(|p| !p.failures.is_empty())
    }

    pub fn point(&self, axis: Option<Axis>, value: f64, policy: PolicyKind) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.axis == axis && p.value == value && p.policy == policy)
    }

    /// `axis_value,policy,mean_cost_per_slot,std_cost_per_slot,mean_total_cost,seeds`.
    pub fn costs_csv(&self, axis: Option<Axis>) -> String {
        let mut out =
            String::from("value,policy,mean_cost_per_slot,std_cost_per_slot,mean_total_cost,seeds\n");
        let horizon = self.horizon() as f64;
        for p in self.points.iter().filter(|p| p.axis == axis) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.value,
                p.policy,
                p.mean_cost_per_slot,
                p.std_cost / horizon,
                p.mean_cost,
                p.seeds
            );
        }
        out
    }

    /// `axis,value,policy,mean_runtime_ms,std_runtime_ms,mean_runtime_per_slot_ms`.
    pub fn runtimes_csv(&self) -> String {
        let mut out = String::from(
            "axis,value,policy,mean_runtime_ms,std_runtime_ms,mean_runtime_per_slot_ms\n",
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.axis.map_or("base", Axis::name),
                p.value,
                p.policy,
                p.mean_runtime_ms,
                p.std_runtime_ms,
                p.mean_runtime_per_slot_ms
            );
        }
        out
    }

    fn horizon(&self) -> usize {
        match &self.spec.workload {
            GeneratorParams::Replacement(p) => p.T,
            GeneratorParams::Poisson(p) => p.T,
            GeneratorParams::Piecewise(p) => p.T,
        }
    }

    /// Writes `summary.json`, one `costs_<axis>.csv` per sweep and `runtimes.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        put("summary.json", serde_json::to_string_pretty(self)? + "\n")?;
        if self.spec.sweeps.is_empty() {
            put("costs_base.csv", self.costs_csv(None))?;
        }
        for sweep in &self.spec.sweeps {
            put(&format!("costs_{}.csv", sweep.axis.name()), self.costs_csv(Some(sweep.axis)))?;
        }
        put("runtimes.csv", self.runtimes_csv())
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn run_dir(out: &Path, axis: Option<Axis>, value: f64) -> PathBuf {
    out.join("runs")
        .join(format!("{}_{}", axis.map_or("base", Axis::name), value))
}

/// Runs every policy at every sweep point for every seed. Each seed gets its
/// own trace, shared by all policies and sweep points. One discarded run per
/// policy precedes the timed ones.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<ExperimentReport> {
    spec.validate()?;
    let points = spec.points()?;
    let traces: Vec<ArrivalTrace> = spec
        .seeds
        .iter()
        .map(|&s| spec.workload.generate(s))
        .collect::<Result<_>>()?;

    for &policy in &spec.policies {
        let _ = run_policy(policy, &traces[0], &points[0].2, spec.seeds[0]);
    }

    let jobs: Vec<(usize, usize, PolicyKind)> = (0..points.len())
        .flat_map(|p| (0..spec.seeds.len()).flat_map(move |s| spec.policies.iter().map(move |&k| (p, s, k))))
        .collect();
    let run_one = |&(p, s, kind): &(usize, usize, PolicyKind)| -> (usize, PolicyKind, Result<RunRecord>) {
        let (axis, value, ref params) = points[p];
        let seed = spec.seeds[s];
        let rec = run_policy(kind, &traces[s], params, seed).and_then(|rec| {
            if let (Some(out), true) = (out, spec.write_runs) {
                rec.write(run_dir(out, axis, value), &format!("{kind}_seed{seed}"))
                    .map_err(|e| Error::invalid(format!("{} = {value}: {e}", axis.map_or("base", Axis::name))))?;
            }
            Ok(rec)
        });
        (p, kind, rec)
    };
    let results: Vec<_> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_one).collect())
    } else {
        jobs.iter().map(run_one).collect()
    };

    let mut grouped: BTreeMap<(usize, PolicyKind), (Vec<f64>, Vec<f64>, Vec<String>)> = BTreeMap::new();
    for (p, kind, rec) in results {
        let entry = grouped.entry((p, kind)).or_default();
        match rec {
            Ok(rec) => {
                entry.0.push(rec.total_cost);
                entry.1.push(rec.runtime_ms);
            }
            Err(e) => entry.2.push(e.to_string()),
        }
    }
    let horizon = traces[0].horizon() as f64;
    let points = grouped
        .into_iter()
        .map(|((p, policy), (costs, runtimes, failures))| {
            let (mean_cost, std_cost) = mean_std(&costs);
            let (mean_runtime_ms, std_runtime_ms) = mean_std(&runtimes);
            PointResult {
                axis: points[p].0,
                value: points[p].1,
                policy,
                seeds: costs.len(),
                mean_cost,
                std_cost,
                mean_cost_per_slot: mean_cost / horizon,
                mean_runtime_ms,
                std_runtime_ms,
                mean_runtime_per_slot_ms: mean_runtime_ms / horizon,
                costs,
                failures,
            }
        })
        .collect();
    let report = ExperimentReport {
        spec: spec.clone(),
        points,
    };
    if let Some(out) = out {
        report.write(out)?;
    }
    Ok(report)
}
