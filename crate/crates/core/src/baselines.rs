//! Comparison policies: receding and committed horizon control, the static
//! offline optimum, the exact dynamic optimum for small instances, and the
//! pseudo-optimum obtained from long offline gradient descent.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gradient::offline_pgd;
use crate::model::{ArrivalTrace, CostModel};
use crate::record::RunRecord;
use crate::workloads::PredictionOracle;

/// Default gradient sweeps of [`pseudo_opt`].
pub const PSEUDO_OPT_ITERATIONS: usize = 300;

/// Window solver shared by RHC and CHC.
///
/// Each service gets an optimal cached/not-cached trajectory over the window
/// from a two-state dynamic program; capacity is then restored slot by slot by
/// keeping the `M` planned services whose trajectory saves the most against
/// never caching (lower index on ties).
#[derive(Debug, Clone)]
pub struct WindowSolver {
    services: usize,
    rows: Vec<f64>,
    len: usize,
    plan: Vec<bool>,
    back0: Vec<bool>,
    back1: Vec<bool>,
    savings: Vec<f64>,
    order: Vec<usize>,
}

impl WindowSolver {
    pub fn new(services: usize) -> Self {
        Self {
            services,
            rows: Vec::new(),
            len: 0,
            plan: Vec::new(),
            back0: Vec::new(),
            back1: Vec::new(),
            savings: vec![0.0; services],
            order: Vec::with_capacity(services),
        }
    }

    /// Plans slots `t..=min(t+W−1, T)` from predictions made at `t`,
    /// starting from the binary state `x_prev`.
    pub fn solve(
        &mut self,
        oracle: &PredictionOracle<'_>,
        t: i64,
        window: usize,
        x_prev: &[bool],
        cost: &CostModel,
    ) -> Result<()> {
        let n = self.services;
        check_len(n, x_prev.len())?;
        let hi = (t + window as i64 - 1).min(oracle.trace().horizon() as i64);
        self.len = (hi - t + 1).max(0) as usize;
        self.rows.resize(self.len * n, 0.0);
        for (k, s) in (t..=hi).enumerate() {
            oracle.predict_row(s, t, &mut self.rows[k * n..(k + 1) * n])?;
        }
        self.solve_rows(x_prev, cost);
        Ok(())
    }

    /// Same as [`Self::solve`] on explicit window rows (`len × N`, row-major).
    pub fn solve_with_rows(&mut self, rows: &[f64], x_prev: &[bool], cost: &CostModel) -> Result<()> {
        let n = self.services;
        check_len(n, x_prev.len())?;
        if rows.len() % n != 0 {
            return Err(Error::invalid("window rows must have N entries each"));
        }
        self.len = rows.len() / n;
        self.rows.clear();
        self.rows.extend_from_slice(rows);
        self.solve_rows(x_prev, cost);
        Ok(())
    }

    fn solve_rows(&mut self, x_prev: &[bool], cost: &CostModel) {
        let (n, len) = (self.services, self.len);
        self.plan.clear();
        self.plan.resize(len * n, false);
        self.back0.resize(len, false);
        self.back1.resize(len, false);
        for i in 0..n {
            let beta = cost.beta[i];
            let (mut c0, mut c1) = if x_prev[i] {
                (f64::INFINITY, 0.0)
            } else {
                (0.0, f64::INFINITY)
            };
            let mut never = 0.0;
            for k in 0..len {
                let miss = cost.alpha * self.rows[k * n + i];
                never += miss;
                // back*: whether the best predecessor was the cached state
                let (b0, n0) = if c0 <= c1 { (false, c0 + miss) } else { (true, c1 + miss) };
                let (b1, n1) = if c1 <= c0 + beta { (true, c1) } else { (false, c0 + beta) };
                self.back0[k] = b0;
                self.back1[k] = b1;
                c0 = n0;
                c1 = n1;
            }
            let mut state = c1 < c0;
            self.savings[i] = never - c0.min(c1);
            for k in (0..len).rev() {
                self.plan[k * n + i] = state;
                state = if state { self.back1[k] } else { self.back0[k] };
            }
        }
        // only services planned into the cache somewhere compete for capacity
        self.order.clear();
        for i in 0..n {
            if (0..len).any(|k| self.plan[k * n + i]) {
                self.order.push(i);
            }
        }
        if self.order.len() <= cost.capacity {
            return;
        }
        let savings = &self.savings;
        self.order
            .sort_by(|&a, &b| savings[b].total_cmp(&savings[a]).then(a.cmp(&b)));
        for k in 0..len {
            let row = &mut self.plan[k * n..(k + 1) * n];
            let mut kept = 0;
            for &i in &self.order {
                if row[i] {
                    if kept < cost.capacity {
                        kept += 1;
                    } else {
                        row[i] = false;
                    }
                }
            }
        }
    }

    /// Number of planned slots.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Plan for the `k`-th slot of the last solved window.
    pub fn planned(&self, k: usize) -> &[bool] {
        &self.plan[k * self.services..(k + 1) * self.services]
    }

    /// Per-service saving of the unconstrained trajectory against never caching.
    pub fn savings(&self) -> &[f64] {
        &self.savings
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::invalid("horizon control needs W >= 1"));
    }
    Ok(())
}

fn to_real(x: &[bool]) -> Vec<f64> {
    x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn window_config(window: usize, exact: bool) -> serde_json::Value {
    serde_json::json!({ "window": window, "exact_predictions": exact })
}

/// Receding horizon control: plan the window, commit its first slot.
pub fn rhc_policy(
    oracle: &PredictionOracle<'_>,
    cost: &CostModel,
    window: usize,
) -> Result<RunRecord> {
    check_window(window)?;
    let started = Instant::now();
    let trace = oracle.trace();
    let n = trace.services();
    check_len(n, cost.services())?;
    let mut solver = WindowSolver::new(n);
    let mut x = vec![false; n];
    let mut decisions = Vec::with_capacity(trace.horizon());
    for t in 1..=trace.horizon() as i64 {
        solver.solve(oracle, t, window, &x, cost)?;
        x.copy_from_slice(solver.planned(0));
        decisions.push(to_real(&x));
    }
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    let mut rec = RunRecord::from_decisions(
        "rhc",
        trace,
        cost,
        decisions,
        0,
        window_config(window, oracle.is_exact()),
    )?;
    rec.runtime_ms = elapsed;
    Ok(rec)
}

/// Committed horizon control: the decision for slot `t` is the mean of the
/// plans for `t` made by the receding-horizon solves at `t−W+1, …, t` (only
/// those at slots `≥ 1` during warm-up). The solves follow the receding
/// horizon trajectory.
pub fn chc_policy(
    oracle: &PredictionOracle<'_>,
    cost: &CostModel,
    window: usize,
) -> Result<RunRecord> {
    check_window(window)?;
    let started = Instant::now();
    let trace = oracle.trace();
    let (n, horizon) = (trace.services(), trace.horizon());
    check_len(n, cost.services())?;
    let mut solver = WindowSolver::new(n);
    let mut x = vec![false; n];
    // sums[(t−1) mod W] accumulates plans for slot t
    let mut sums = vec![0u32; window * n];
    let mut counts = vec![0u32; window];
    let mut decisions = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        solver.solve(oracle, t as i64, window, &x, cost)?;
        x.copy_from_slice(solver.planned(0));
        for k in 0..solver.len() {
            let slot = (t - 1 + k) % window;
            counts[slot] += 1;
            for (s, &b) in sums[slot * n..(slot + 1) * n].iter_mut().zip(solver.planned(k)) {
                *s += u32::from(b);
            }
        }
        let slot = (t - 1) % window;
        let c = f64::from(counts[slot]);
        let row = &mut sums[slot * n..(slot + 1) * n];
        decisions.push(row.iter().map(|&s| f64::from(s) / c).collect());
        row.fill(0);
        counts[slot] = 0;
    }
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    let mut rec = RunRecord::from_decisions(
        "chc",
        trace,
        cost,
        decisions,
        0,
        window_config(window, oracle.is_exact()),
    )?;
    rec.runtime_ms = elapsed;
    Ok(rec)
}

/// Static offline optimum: the `M` services with the largest totals among
/// those with `Σ_t λ_{n,t} ≥ β*/α`, cached in every slot.
pub fn sopt_policy(trace: &ArrivalTrace, cost: &CostModel) -> Result<RunRecord> {
    let started = Instant::now();
    check_len(trace.services(), cost.services())?;
    let totals = trace.service_totals();
    let threshold = cost.beta_star() / cost.alpha;
    let mut eligible: Vec<usize> = (0..totals.len()).filter(|&i| totals[i] >= threshold).collect();
    eligible.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    let mut x = vec![0.0; totals.len()];
    for &i in eligible.iter().take(cost.capacity) {
        x[i] = 1.0;
    }
    let decisions = vec![x; trace.horizon()];
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    let mut rec = RunRecord::from_decisions(
        "sopt",
        trace,
        cost,
        decisions,
        0,
        serde_json::json!({ "threshold": threshold }),
    )?;
    rec.runtime_ms = elapsed;
    Ok(rec)
}

/// Size limits for [`exact_opt_dp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpBudget {
    pub max_services: usize,
    pub max_capacity: usize,
    pub max_horizon: usize,
}

impl Default for DpBudget {
    fn default() -> Self {
        Self {
            max_services: 10,
            max_capacity: 4,
            max_horizon: 50,
        }
    }
}

/// Number of cache sets with at most `m` of `n` services.
pub fn cache_state_count(n: usize, m: usize) -> u64 {
    let mut total = 0u64;
    let mut c = 1u64;
    for k in 0..=m.min(n) {
        total += c;
        c = c * (n - k) as u64 / (k + 1) as u64;
    }
    total
}

/// Minimum cost over binary schedules of `rows` (`len × N`) starting from the
/// cache set `init`, by dynamic programming over all sets of size `≤ M`.
/// Returns the chosen sets per slot and the cost. Ties go to the smaller mask.
pub fn subset_dp(rows: &[f64], services: usize, init: u32, cost: &CostModel) -> Result<(Vec<u32>, f64)> {
    if services > 20 {
        return Err(Error::OverBudget(format!("{services} services in a subset program")));
    }
    let len = rows.len() / services;
    let states: Vec<u32> = (0u32..1 << services)
        .filter(|s| s.count_ones() as usize <= cost.capacity)
        .collect();
    let mut beta_sum = vec![0.0; 1 << services];
    for mask in 1usize..1 << services {
        let low = mask.trailing_zeros() as usize;
        beta_sum[mask] = beta_sum[mask & (mask - 1)] + cost.beta[low];
    }
    let mut value: Vec<f64> = states
        .iter()
        .map(|&s| if s == init { 0.0 } else { f64::INFINITY })
        .collect();
    if !states.contains(&init) {
        return Err(Error::invalid("initial cache set exceeds capacity"));
    }
    let mut back = vec![0u32; len * states.len()];
    let mut next = vec![0.0; states.len()];
    for k in 0..len {
        let row = &rows[k * services..(k + 1) * services];
        let total: f64 = row.iter().sum();
        for (j, &to) in states.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (i, &from) in states.iter().enumerate() {
                let v = value[i] + beta_sum[(to & !from) as usize];
                if v < best {
                    best = v;
                    arg = i as u32;
                }
            }
            let hosted: f64 = (0..services).filter(|b| to >> b & 1 == 1).map(|b| row[b]).sum();
            next[j] = best + cost.alpha * (total - hosted);
            back[k * states.len() + j] = arg;
        }
        std::mem::swap(&mut value, &mut next);
    }
    let (mut j, best) = value
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    let mut plan = vec![0u32; len];
    for k in (0..len).rev() {
        plan[k] = states[j];
        j = back[k * states.len() + j] as usize;
    }
    Ok((plan, best))
}

fn mask_to_real(mask: u32, n: usize) -> Vec<f64> {
    (0..n).map(|b| f64::from(mask >> b & 1)).collect()
}

/// Exact dynamic offline optimum over binary schedules.
pub fn exact_opt_dp(trace: &ArrivalTrace, cost: &CostModel, budget: DpBudget) -> Result<RunRecord> {
    let (n, horizon, m) = (trace.services(), trace.horizon(), cost.capacity);
    check_len(n, cost.services())?;
    if n > budget.max_services || m > budget.max_capacity || horizon > budget.max_horizon {
        return Err(Error::OverBudget(format!(
            "N = {n}, M = {m}, T = {horizon} ({} cache sets per slot); limits are N <= {}, M <= {}, T <= {}",
            cache_state_count(n, m),
            budget.max_services,
            budget.max_capacity,
            budget.max_horizon
        )));
    }
    let started = Instant::now();
    let (plan, _) = subset_dp(trace.as_flat(), n, 0, cost)?;
    let decisions = plan.iter().map(|&s| mask_to_real(s, n)).collect();
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    let mut rec = RunRecord::from_decisions(
        "opt-dp",
        trace,
        cost,
        decisions,
        0,
        serde_json::to_value(budget)?,
    )?;
    rec.runtime_ms = elapsed;
    Ok(rec)
}

/// Offline gradient descent with `iterations` sweeps, costed fractionally.
/// An approximation of the dynamic optimum: it may land on either side of it.
pub fn pseudo_opt(trace: &ArrivalTrace, cost: &CostModel, iterations: usize) -> Result<RunRecord> {
    let started = Instant::now();
    let q = offline_pgd(trace, cost, iterations)?;
    let decisions = q.iter().map(|p| p.as_slice().to_vec()).collect();
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    let mut rec = RunRecord::from_decisions(
        "pseudo-opt",
        trace,
        cost,
        decisions,
        0,
        serde_json::json!({ "iterations": iterations }),
    )?;
    rec.runtime_ms = elapsed;
    rec.fractional = Some(q);
    Ok(rec)
}
