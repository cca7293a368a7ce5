//! Randomized oracle suites behind `rosc validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{exact_opt_dp, DpBudget};
use crate::bench::{regret, regret_bound};
use crate::error::{Error, Result};
use crate::gradient::offline_pgd;
use crate::model::{path_length, ArrivalTrace, CostModel};
use crate::policy::{run_rosc, GammaPolicy, RoscConfig};
use crate::projection::{project_bounded_simplex, project_bounded_simplex_oracle};
use crate::sampler::{quantize_probs, RngStream, SamplePathEnsemble};
use crate::workloads::PredictionOracle;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub passed: bool,
    /// Largest observed deviation, or the tightest margin for ceilings.
    pub worst: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, cases: usize, failures: usize, worst: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            cases,
            failures,
            passed: failures == 0,
            worst,
            detail,
        }
    }
}

/// Suite names accepted by [`run_check`].
pub const CHECKS: [&str; 4] = ["projection", "lemma1", "sampler", "regret-bound"];

fn gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Fast projection against the KKT enumeration oracle on Gaussian inputs with
/// `N ∈ [2, 12]`, `M ∈ [1, N]`, plus idempotence and non-expansiveness.
pub fn projection_suite(cases: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..cases {
        let n = rng.random_range(2..=12);
        let m = rng.random_range(1..=n);
        let scale = [0.5, 1.0, 3.0][rng.random_range(0..3)];
        let z = gaussian(&mut rng, n, scale);
        let y = gaussian(&mut rng, n, scale);
        let p = project_bounded_simplex(&z, m)?;
        let o = project_bounded_simplex_oracle(&z, m)?;
        let err = p.as_slice().iter().zip(o.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let again = project_bounded_simplex(p.as_slice(), m)?;
        let idem = dist(again.as_slice(), p.as_slice());
        let q = project_bounded_simplex(&y, m)?;
        let expand = dist(p.as_slice(), q.as_slice()) - dist(&z, &y);
        worst = worst.max(err);
        if err > 1e-9 || idem > 1e-12 || expand > 1e-12 {
            failures += 1;
        }
    }
    Ok(CheckResult::new(
        "projection",
        cases,
        failures,
        worst,
        "elementwise 1e-9 vs KKT oracle, idempotence 1e-12, non-expansive".into(),
    ))
}

fn random_trace(rng: &mut impl Rng, t: usize, n: usize, hi: u32) -> Result<ArrivalTrace> {
    let rows = (0..t)
        .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..hi))).collect())
        .collect();
    ArrivalTrace::new(rows)
}

/// Online fractional iterates against offline synchronous descent with `W`
/// sweeps, for random `N ≤ 20`, `T ≤ 50`, `W ≤ 8` and exact predictions.
pub fn online_offline_suite(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut failures, mut worst) = (0, 0.0f64);
    for i in 0..instances {
        let n = rng.random_range(1..=20);
        let m = rng.random_range(1..=n);
        let t = rng.random_range(1..=50);
        let w = rng.random_range(0..=8);
        let hi = rng.random_range(2..500);
        let trace = random_trace(&mut rng, t, n, hi)?;
        let beta = rng.random_range(0.5..30.0);
        let cost = CostModel::uniform(0.05, beta, n, m, rng.random_range(0.01..0.5))?;
        let cost = cost.clone().with_eta(cost.eta * rng.random_range(1.0..50.0))?;
        let cfg = RoscConfig::new(cost.clone(), w, 10, i as u64);
        let rec = run_rosc(&trace, &PredictionOracle::exact(&trace), &cfg)?;
        let online = rec.fractional_trace().expect("rosc keeps its iterates");
        let offline = offline_pgd(&trace, &cost, w)?;
        let err = online
            .iter()
            .zip(&offline)
            .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if err > 1e-9 {
            failures += 1;
        }
    }
    Ok(CheckResult::new(
        "lemma1",
        instances,
        failures,
        worst,
        "online iterates vs offline descent, elementwise 1e-9".into(),
    ))
}

/// Random feasible quantized targets: column counts must match exactly and
/// every path must respect the capacity.
pub fn sampler_suite(updates: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut done = 0;
    while done < updates {
        let n = rng.random_range(1..=15);
        let m = rng.random_range(1..=n);
        let k = rng.random_range(1..=64u32);
        let mut stream = RngStream::new(rng.random(), 0);
        let mut ens = SamplePathEnsemble::new(k as usize, n, m, &mut stream)?;
        for _ in 0..rng.random_range(1..=20) {
            let z = gaussian(&mut rng, n, 1.0);
            let p = project_bounded_simplex(&z, m)?;
            let pq = quantize_probs(p.as_slice(), k, m)?;
            ens.update(&pq, &mut stream)?;
            if ens.column_counts() != pq.counts() || (0..k as usize).any(|r| ens.row_sum(r) > m) {
                failures += 1;
            }
            done += 1;
        }
    }
    Ok(CheckResult::new(
        "sampler",
        done,
        failures,
        0.0,
        "exact column counts and per-path capacity after each update".into(),
    ))
}

/// Seed-averaged regret against the exact dynamic optimum stays below the
/// theoretical bound on tiny instances (`N ≤ 8`, `M ≤ 3`, `T ≤ 40`).
pub fn regret_ceiling_suite(instances: usize, seeds: u64, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..instances {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=n.min(3));
        let t = rng.random_range(5..=40);
        let trace = random_trace(&mut rng, t, n, 400)?;
        let cost = CostModel::uniform(0.05, rng.random_range(1.0..20.0), n, m, 0.05)?;
        let h = path_length(&trace, m);
        let (w, k) = (rng.random_range(1..=6), rng.random_range(2..=20u32));
        let opt = exact_opt_dp(&trace, &cost, DpBudget::default())?.total_cost;
        let oracle = PredictionOracle::exact(&trace);
        let mut total = 0.0;
        for s in 0..seeds {
            let cfg = RoscConfig::new(cost.clone(), w, k, s).with_gamma(GammaPolicy::Theorem {
                path_length: h,
                horizon: t,
            });
            total += run_rosc(&trace, &oracle, &cfg)?.total_cost;
        }
        let reg = regret(total / seeds as f64, opt);
        let bound = regret_bound(&cost, n, t, trace.max_slot_total(), k, w, h)?.total;
        tightest = tightest.min(bound - reg);
        if reg > bound {
            failures += 1;
        }
    }
    Ok(CheckResult::new(
        "regret-bound",
        instances,
        failures,
        tightest,
        format!("mean regret over {seeds} seeds vs exact optimum, below the bound"),
    ))
}

/// Runs one named suite; `size` is cases, instances or updates.
pub fn run_check(name: &str, size: usize, seed: u64) -> Result<CheckResult> {
    match name {
        "projection" => projection_suite(size, seed),
        "lemma1" => online_offline_suite(size, seed),
        "sampler" => sampler_suite(size, seed),
        "regret-bound" => regret_ceiling_suite(size, 100, seed),
        _ => Err(Error::invalid(format!("unknown check {name:?}; known: {}", CHECKS.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_at_small_sizes() {
        for r in [
            projection_suite(300, 1).unwrap(),
            online_offline_suite(10, 2).unwrap(),
            sampler_suite(200, 3).unwrap(),
            regret_ceiling_suite(2, 10, 4).unwrap(),
        ] {
            assert!(r.passed, "{r:?}");
        }
        assert!(run_check("nope", 1, 0).is_err());
    }
}
