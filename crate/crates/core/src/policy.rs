//! The randomized online service caching policy.
//!
//! Outer steps run from `t = −W+1` to `T`. Each step reads the prediction for
//! slot `t+W−1`, seeds `P_{t+W}` with its top-`M` indicator, runs one
//! projected gradient sweep over the window and, once `t ≥ 1`, rounds the
//! now-final `P_t` through the sample-path ensemble.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{pgd_window_update, WindowRows, WindowState};
use crate::model::{top_m_indicator, ArrivalTrace, CostModel, ProbVector};
use crate::record::RunRecord;
use crate::sampler::{quantize_probs, RngStream, SamplePathEnsemble};
use crate::workloads::PredictionOracle;

/// How the smoothing width `γ` (and with it `η = γ/(12β*)`) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPolicy {
    Fixed(f64),
    /// `γ = √(H_T/T)`; needs the path length and horizon up front.
    Theorem { path_length: f64, horizon: usize },
}

impl GammaPolicy {
    pub fn gamma(&self) -> Result<f64> {
        match *self {
            GammaPolicy::Fixed(g) => Ok(g),
            GammaPolicy::Theorem { path_length, horizon } => {
                if horizon == 0 || !(path_length > 0.0) {
                    return Err(Error::invalid(format!(
                        "theorem step size needs H_T > 0 and T > 0, got H_T = {path_length}, T = {horizon}"
                    )));
                }
                Ok((path_length / horizon as f64).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoscConfig {
    pub cost: CostModel,
    /// Prediction window `W`; `0` disables the gradient sweeps.
    pub window: usize,
    /// Number of sample paths `K`.
    pub paths: u32,
    pub seed: u64,
    pub gamma: GammaPolicy,
}

impl RoscConfig {
    /// Uses the `γ` and `η` already in `cost`.
    pub fn new(cost: CostModel, window: usize, paths: u32, seed: u64) -> Self {
        let gamma = GammaPolicy::Fixed(cost.gamma);
        Self {
            cost,
            window,
            paths,
            seed,
            gamma,
        }
    }

    pub fn with_gamma(mut self, gamma: GammaPolicy) -> Self {
        self.gamma = gamma;
        self
    }

    /// The cost model with `γ` and `η` resolved. A fixed `γ` equal to the
    /// model's keeps its `η` untouched.
    pub fn effective_cost(&self) -> Result<CostModel> {
        match self.gamma {
            GammaPolicy::Fixed(g) if g == self.cost.gamma => Ok(self.cost.clone()),
            policy => self.cost.clone().with_gamma(policy.gamma()?),
        }
    }
}

/// Runs the policy on `trace`, deciding on `predictions` and paying on the
/// true arrivals.
pub fn run_rosc(
    trace: &ArrivalTrace,
    predictions: &PredictionOracle<'_>,
    config: &RoscConfig,
) -> Result<RunRecord> {
    let started = Instant::now();
    let cost = config.effective_cost()?;
    let (n, horizon, w) = (trace.services(), trace.horizon(), config.window);
    crate::error::check_len(n, cost.services())?;
    crate::error::check_len(n, predictions.trace().services())?;
    if config.paths == 0 {
        return Err(Error::invalid("need K >= 1 sample paths"));
    }
    let t_end = horizon as i64;
    let w_i = w as i64;

    let mut rng = RngStream::labeled(config.seed, "rosc");
    let mut ensemble = SamplePathEnsemble::new(config.paths as usize, n, cost.capacity, &mut rng)?;
    let mut state = WindowState::new(n, w);
    let mut rows = WindowRows::new(n);
    let mut predicted = vec![0.0; n];
    let mut decisions = Vec::with_capacity(horizon);
    let mut fractional = Vec::with_capacity(horizon);

    for t in (1 - w_i)..=t_end {
        let target = t + w_i - 1;
        if t + w_i <= t_end {
            if target < t {
                // nothing to predict: the slot has already been observed
                predicted.copy_from_slice(trace.arrivals(target));
            } else {
                predictions.predict_row(target, t, &mut predicted)?;
            }
            let theta = top_m_indicator(&predicted, cost.capacity).to_real();
            state.admit(t + w_i, &theta)?;
        }
        if w > 0 {
            let (lo, hi) = (t.max(1), target.min(t_end));
            rows.reset(lo);
            for s in lo..=hi {
                predictions.predict_row(s, t, rows.push_zeroed())?;
            }
            pgd_window_update(&mut state, &rows, &cost, t, horizon)?;
        }
        if t >= 1 {
            let p = state.p(t);
            let pq = quantize_probs(p, config.paths, cost.capacity)?;
            ensemble.update(&pq, &mut rng)?;
            decisions.push(ensemble.decision().to_real());
            fractional.push(ProbVector::new_unchecked(p.to_vec()));
        }
    }

    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    let mut record = RunRecord::from_decisions(
        "rosc",
        trace,
        &cost,
        decisions,
        config.seed,
        serde_json::to_value(config)?,
    )?;
    record.runtime_ms = elapsed;
    record.fractional = Some(fractional);
    Ok(record)
}

/// `P′_1..P′_T` of a finished run.
pub fn fractional_trace(record: &RunRecord) -> Result<&[ProbVector]> {
    record
        .fractional_trace()
        .ok_or_else(|| Error::invalid(format!("policy {} keeps no fractional iterates", record.policy)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient::offline_pgd;
    use crate::model::total_cost;
    use crate::workloads::{gen_replacement, ReplacementParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_trace(rng: &mut impl Rng, t: usize, n: usize) -> ArrivalTrace {
        let rows = (0..t)
            .map(|_| (0..n).map(|_| f64::from(rng.random_range(0u32..60))).collect())
            .collect();
        ArrivalTrace::new(rows).unwrap()
    }

    #[test]
    fn online_iterates_equal_offline_pgd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..20 {
            let n = rng.random_range(2..12);
            let m = rng.random_range(1..=n.min(4));
            let t = rng.random_range(1..30);
            let w = rng.random_range(0..8);
            let trace = random_trace(&mut rng, t, n);
            let cost = CostModel::uniform(0.05, rng.random_range(0.5..20.0), n, m, 0.05)
                .unwrap()
                .with_eta(rng.random_range(0.001..0.2))
                .unwrap();
            let cfg = RoscConfig::new(cost.clone(), w, 10, case);
            let rec = run_rosc(&trace, &PredictionOracle::exact(&trace), &cfg).unwrap();
            let offline = offline_pgd(&trace, &cost, w).unwrap();
            for (a, b) in fractional_trace(&rec).unwrap().iter().zip(&offline) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    assert!((x - y).abs() <= 1e-9, "case {case}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn no_window_follows_previous_top_m() {
        let trace = ArrivalTrace::new(vec![
            vec![5.0, 1.0, 0.0],
            vec![0.0, 9.0, 2.0],
            vec![3.0, 0.0, 8.0],
        ])
        .unwrap();
        let cost = CostModel::uniform(0.05, 1.0, 3, 1, 0.05).unwrap();
        let rec = run_rosc(&trace, &PredictionOracle::exact(&trace), &RoscConfig::new(cost, 0, 7, 1))
            .unwrap();
        let expect = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        for (t, e) in expect.iter().enumerate() {
            assert_eq!(rec.fractional.as_ref().unwrap()[t].as_slice(), e);
            assert_eq!(&rec.decisions[t], e);
        }
    }

    #[test]
    fn same_seed_same_record() {
        let params = ReplacementParams {
            N: 40,
            T: 200,
            ..Default::default()
        };
        let trace = gen_replacement(&params, 3).unwrap();
        let cost = CostModel::uniform(0.05, 10.0, 40, 5, 0.05).unwrap();
        let cfg = RoscConfig::new(cost.clone(), 5, 20, 9);
        let oracle = PredictionOracle::exact(&trace);
        let a = run_rosc(&trace, &oracle, &cfg).unwrap();
        let b = run_rosc(&trace, &oracle, &cfg).unwrap();
        assert_eq!(a.decisions, b.decisions);
        assert_eq!(a.costs_csv_string(), b.costs_csv_string());
        assert_eq!(a.total_cost, total_cost(&trace, &a.decisions, &cost).unwrap());
        for p in a.fractional.as_ref().unwrap() {
            assert!(p.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(p.as_slice().iter().sum::<f64>() <= 5.0 + 1e-9);
        }
        for x in &a.decisions {
            assert!(x.iter().sum::<f64>() <= 5.0);
        }
    }

    #[test]
    fn decisions_ignore_arrivals_beyond_the_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, t_len, w) = (6, 25, 3);
        let trace = random_trace(&mut rng, t_len, n);
        let cost = CostModel::uniform(0.05, 4.0, n, 2, 0.05).unwrap();
        let cfg = RoscConfig::new(cost, w, 16, 2);
        let base = run_rosc(&trace, &PredictionOracle::exact(&trace), &cfg).unwrap();
        for t in 1..=(t_len - w) {
            let bumped = trace.with_row(t + w, &vec![500.0; n]).unwrap();
            let rec = run_rosc(&bumped, &PredictionOracle::exact(&bumped), &cfg).unwrap();
            assert_eq!(rec.decisions[..t], base.decisions[..t], "slot {t}");
        }
    }

    #[test]
    fn theorem_gamma() {
        let cost = CostModel::uniform(0.05, 10.0, 4, 2, 0.05).unwrap();
        let cfg = RoscConfig::new(cost, 2, 4, 0).with_gamma(GammaPolicy::Theorem {
            path_length: 25.0,
            horizon: 100,
        });
        let eff = cfg.effective_cost().unwrap();
        assert_eq!(eff.gamma, 0.5);
        assert_eq!(eff.eta, 0.5 / 120.0);
        let zero = cfg.with_gamma(GammaPolicy::Theorem {
            path_length: 0.0,
            horizon: 100,
        });
        assert!(zero.effective_cost().is_err());
    }
}
