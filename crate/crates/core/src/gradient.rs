//! Auxiliary cost, its gradient and the two projected-gradient schedules.
//!
//! The auxiliary cost replaces the instantiation term `β|Δ|₊` of the true cost
//! with `3β/γ · Δ²` for `0 <= Δ <= γ` and `3βΔ` for `Δ > γ`, where
//! `Δ = p_t − p_{t−1}`. The forwarding term is unchanged.
//!
//! [`pgd_window_update`] is the online schedule: at outer step `t` it walks the
//! look-ahead window `t+W−1, …, max(1, t)` backwards and takes one projected
//! gradient step per slot. [`OfflinePgd`] runs the synchronous full-horizon
//! iteration on the same objective. Given identical initialization the two
//! produce identical iterates, which the tests check bit for bit.

use crate::error::{check_len, Error, Result};
use crate::model::{top_m_indicator, ArrivalTrace, CostModel, ProbVector};
use crate::projection::BoundedSimplexProjector;

/// Marginal instantiation price `g_n(a, b)` of moving from `a` to `b`.
///
/// Zero for `b < a`, `6β/γ · (b − a)` on `[0, γ]` (both ends included) and
/// `3β` beyond `γ`.
pub fn g_fn(a: f64, b: f64, beta_n: f64, gamma: f64) -> f64 {
    let d = b - a;
    if d < 0.0 {
        0.0
    } else if d <= gamma {
        6.0 * beta_n / gamma * d
    } else {
        3.0 * beta_n
    }
}

/// Smoothed instantiation cost of one service.
pub fn aux_switching(delta: f64, beta_n: f64, gamma: f64) -> f64 {
    if delta < 0.0 {
        0.0
    } else if delta <= gamma {
        3.0 * beta_n / gamma * delta * delta
    } else {
        3.0 * beta_n * delta
    }
}

/// `F̂_t(P_t, P_{t−1})`.
pub fn aux_cost(p_cur: &[f64], p_prev: &[f64], lambda: &[f64], cost: &CostModel) -> Result<f64> {
    check_len(p_cur.len(), p_prev.len())?;
    check_len(p_cur.len(), lambda.len())?;
    check_len(p_cur.len(), cost.services())?;
    let mut total = 0.0;
    for n in 0..p_cur.len() {
        total += aux_switching(p_cur[n] - p_prev[n], cost.beta[n], cost.gamma);
        total += cost.alpha * lambda[n] * (1.0 - p_cur[n]);
    }
    Ok(total)
}

/// Source of arrival rows addressed by slot.
pub trait ArrivalRows {
    fn row(&self, slot: i64) -> &[f64];
}

impl ArrivalRows for ArrivalTrace {
    fn row(&self, slot: i64) -> &[f64] {
        self.arrivals(slot)
    }
}

/// A contiguous block of rows starting at slot `first`; zero elsewhere.
#[derive(Debug, Clone)]
pub struct WindowRows {
    first: i64,
    services: usize,
    data: Vec<f64>,
    zeros: Vec<f64>,
}

impl WindowRows {
    pub fn new(services: usize) -> Self {
        Self {
            first: 1,
            services,
            data: Vec::new(),
            zeros: vec![0.0; services],
        }
    }

    /// Clears the block and restarts it at `first`.
    pub fn reset(&mut self, first: i64) {
        self.first = first;
        self.data.clear();
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        check_len(self.services, row.len())?;
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Appends a row and hands out the storage for the caller to fill.
    pub fn push_zeroed(&mut self) -> &mut [f64] {
        let start = self.data.len();
        self.data.resize(start + self.services, 0.0);
        &mut self.data[start..]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.services
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

impl ArrivalRows for WindowRows {
    fn row(&self, slot: i64) -> &[f64] {
        let offset = slot - self.first;
        if offset < 0 || offset as usize >= self.len() {
            return &self.zeros;
        }
        let start = offset as usize * self.services;
        &self.data[start..start + self.services]
    }
}

/// Iterates `P_τ` and their pre-update snapshots `P̄_τ` over the live slots
/// `t−1, …, t+W` of the online schedule.
///
/// Storage is a ring of `W + 2` slots; slots that have not been written are
/// zero.
#[derive(Debug, Clone)]
pub struct WindowState {
    window: usize,
    services: usize,
    step: i64,
    p: Vec<f64>,
    p_bar: Vec<f64>,
    grad: Vec<f64>,
    projector: BoundedSimplexProjector,
}

impl WindowState {
    pub fn new(services: usize, window: usize) -> Self {
        let slots = window + 2;
        Self {
            window,
            services,
            step: 1 - window as i64,
            p: vec![0.0; slots * services],
            p_bar: vec![0.0; slots * services],
            grad: vec![0.0; services],
            projector: BoundedSimplexProjector::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn services(&self) -> usize {
        self.services
    }

    /// Outer step `t` the state was last advanced to.
    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn set_step(&mut self, t: i64) {
        self.step = t;
    }

    fn offset(&self, slot: i64) -> usize {
        slot.rem_euclid(self.window as i64 + 2) as usize * self.services
    }

    pub fn p(&self, slot: i64) -> &[f64] {
        let o = self.offset(slot);
        &self.p[o..o + self.services]
    }

    pub fn p_bar(&self, slot: i64) -> &[f64] {
        let o = self.offset(slot);
        &self.p_bar[o..o + self.services]
    }

    pub fn set_p(&mut self, slot: i64, values: &[f64]) -> Result<()> {
        check_len(self.services, values.len())?;
        let o = self.offset(slot);
        self.p[o..o + self.services].copy_from_slice(values);
        Ok(())
    }

    pub fn set_p_bar(&mut self, slot: i64, values: &[f64]) -> Result<()> {
        check_len(self.services, values.len())?;
        let o = self.offset(slot);
        self.p_bar[o..o + self.services].copy_from_slice(values);
        Ok(())
    }

    /// Brings a new slot into the window: `P_slot ← init`, `P̄_slot ← 0`.
    pub fn admit(&mut self, slot: i64, init: &[f64]) -> Result<()> {
        check_len(self.services, init.len())?;
        let o = self.offset(slot);
        self.p[o..o + self.services].copy_from_slice(init);
        self.p_bar[o..o + self.services].fill(0.0);
        Ok(())
    }

    fn window_bounds(&self, horizon: usize) -> (i64, i64) {
        let lo = self.step.max(1);
        let hi = (self.step + self.window as i64 - 1).min(horizon as i64);
        (lo, hi)
    }

    /// Gradient at slot `tau` into the internal buffer.
    fn fill_gradient(&mut self, tau: i64, lambda: &[f64], cost: &CostModel, horizon: usize) {
        let n = self.services;
        let prev_bar = self.offset(tau - 1);
        let cur = self.offset(tau);
        let next = self.offset(tau + 1);
        let has_next = tau < horizon as i64;
        for i in 0..n {
            let p = self.p[cur + i];
            let mut d = g_fn(self.p_bar[prev_bar + i], p, cost.beta[i], cost.gamma)
                - cost.alpha * lambda[i];
            if has_next {
                d -= g_fn(p, self.p[next + i], cost.beta[i], cost.gamma);
            }
            self.grad[i] = d;
        }
    }
}

/// Gradient of `F̂_τ(P_τ, P̄_{τ−1}) + F̂_{τ+1}(P_{τ+1}, P_τ)` with respect to
/// `P_τ`; the forward term is dropped at `τ = T`.
pub fn window_gradient(
    tau: i64,
    state: &mut WindowState,
    lambda_tau: &[f64],
    cost: &CostModel,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_len(state.services, lambda_tau.len())?;
    check_len(state.services, cost.services())?;
    let (lo, hi) = state.window_bounds(horizon);
    if tau < lo || tau > hi {
        return Err(Error::invalid(format!(
            "slot {tau} outside the current window {lo}..={hi}"
        )));
    }
    state.fill_gradient(tau, lambda_tau, cost, horizon);
    Ok(state.grad.clone())
}

/// One online sweep at outer step `t`: for `τ = t+W−1` down to `max(1, t)`,
/// skipping slots past the horizon, set `P̄_τ ← P_τ` and
/// `P_τ ← Π_D(P_τ − η ∇)`.
///
/// The caller must already have admitted `P_{t+W}`.
pub fn pgd_window_update(
    state: &mut WindowState,
    rows: &impl ArrivalRows,
    cost: &CostModel,
    t: i64,
    horizon: usize,
) -> Result<()> {
    check_len(state.services, cost.services())?;
    state.step = t;
    let (lo, hi) = state.window_bounds(horizon);
    let n = state.services;
    let mut tau = hi;
    while tau >= lo {
        state.fill_gradient(tau, rows.row(tau), cost, horizon);
        let cur = state.offset(tau);
        let (p, p_bar) = (&mut state.p[cur..cur + n], &mut state.p_bar[cur..cur + n]);
        p_bar.copy_from_slice(p);
        for (v, g) in p.iter_mut().zip(&state.grad) {
            *v -= cost.eta * g;
        }
        state.projector.project_in_place(p, cost.capacity)?;
        tau -= 1;
    }
    Ok(())
}

/// Synchronous projected gradient descent on `J(Q) = Σ_t F̂_t(Q_t, Q_{t−1})`
/// over the full horizon, with `Q_0 = 0` held fixed.
#[derive(Debug, Clone)]
pub struct OfflinePgd<'a> {
    trace: &'a ArrivalTrace,
    cost: &'a CostModel,
    q: Vec<f64>,
    next: Vec<f64>,
    iterations: usize,
    projector: BoundedSimplexProjector,
}

impl<'a> OfflinePgd<'a> {
    /// Starts from `Q_t = Θ_{t−1}`, the top-`M` indicator of the previous slot.
    pub fn new(trace: &'a ArrivalTrace, cost: &'a CostModel) -> Result<Self> {
        check_len(trace.services(), cost.services())?;
        let (horizon, n) = (trace.horizon(), trace.services());
        let mut q = vec![0.0; horizon * n];
        for t in 2..=horizon {
            let theta = top_m_indicator(trace.arrivals(t as i64 - 1), cost.capacity);
            q[(t - 1) * n..t * n].copy_from_slice(&theta.to_real());
        }
        Ok(Self {
            trace,
            cost,
            next: q.clone(),
            q,
            iterations: 0,
            projector: BoundedSimplexProjector::new(),
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `Q_t` for `t` in `1..=T`.
    pub fn slot(&self, t: usize) -> &[f64] {
        let n = self.trace.services();
        &self.q[(t - 1) * n..t * n]
    }

    /// One synchronous sweep `Q ← Π_H(Q − η∇J(Q))`.
    pub fn step(&mut self) -> Result<()> {
        let (horizon, n) = (self.trace.horizon(), self.trace.services());
        let cost = self.cost;
        let zeros = vec![0.0; n];
        for t in 1..=horizon {
            let prev = if t == 1 {
                &zeros[..]
            } else {
                &self.q[(t - 2) * n..(t - 1) * n]
            };
            let cur = &self.q[(t - 1) * n..t * n];
            let lambda = self.trace.arrivals(t as i64);
            let out = &mut self.next[(t - 1) * n..t * n];
            for i in 0..n {
                let mut d = g_fn(prev[i], cur[i], cost.beta[i], cost.gamma) - cost.alpha * lambda[i];
                if t < horizon {
                    d -= g_fn(cur[i], self.q[t * n + i], cost.beta[i], cost.gamma);
                }
                out[i] = cur[i] - cost.eta * d;
            }
            self.projector.project_in_place(out, cost.capacity)?;
        }
        std::mem::swap(&mut self.q, &mut self.next);
        self.iterations += 1;
        Ok(())
    }

    /// `J(Q)` at the current iterate.
    pub fn objective(&self) -> Result<f64> {
        let n = self.trace.services();
        let zeros = vec![0.0; n];
        let mut total = 0.0;
        for t in 1..=self.trace.horizon() {
            let prev = if t == 1 { &zeros[..] } else { self.slot(t - 1) };
            total += aux_cost(self.slot(t), prev, self.trace.arrivals(t as i64), self.cost)?;
        }
        Ok(total)
    }

    pub fn into_solution(self) -> Vec<ProbVector> {
        let n = self.trace.services();
        self.q
            .chunks_exact(n)
            .map(|c| ProbVector::new_unchecked(c.to_vec()))
            .collect()
    }
}

/// `Q^W` after `iterations` synchronous sweeps.
pub fn offline_pgd(
    trace: &ArrivalTrace,
    cost: &CostModel,
    iterations: usize,
) -> Result<Vec<ProbVector>> {
    let mut pgd = OfflinePgd::new(trace, cost)?;
    for _ in 0..iterations {
        pgd.step()?;
    }
    Ok(pgd.into_solution())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cost1(beta: f64) -> CostModel {
        CostModel::new(0.05, vec![beta], 1, 0.05).unwrap()
    }

    #[test]
    fn aux_cost_examples() {
        let c = cost1(10.0);
        assert_abs_diff_eq!(
            aux_cost(&[0.3], &[0.3], &[40.0], &c).unwrap(),
            0.05 * 40.0 * 0.7,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(aux_cost(&[0.02], &[0.0], &[0.0], &c).unwrap(), 0.24, epsilon = 1e-12);
        assert_abs_diff_eq!(aux_cost(&[0.2], &[0.0], &[0.0], &c).unwrap(), 6.0, epsilon = 1e-12);
        // decreases never pay
        assert_abs_diff_eq!(aux_cost(&[0.0], &[0.9], &[0.0], &c).unwrap(), 0.0, epsilon = 1e-12);
        assert!(aux_cost(&[0.0, 0.1], &[0.0], &[0.0], &c).is_err());
    }

    #[test]
    fn g_fn_branches() {
        assert_eq!(g_fn(0.2, 0.18, 10.0, 0.05), 0.0);
        assert_abs_diff_eq!(g_fn(0.2, 0.22, 10.0, 0.05), 24.0, epsilon = 1e-9);
        // quadratic branch owns both breakpoints
        assert_eq!(g_fn(0.0, 0.0, 10.0, 0.05), 0.0);
        assert_abs_diff_eq!(g_fn(0.0, 0.05, 10.0, 0.05), 60.0, epsilon = 1e-12);
        assert_eq!(g_fn(0.0, 0.0500001, 10.0, 0.05), 30.0);
    }

    fn state_with(window: usize, entries: &[(i64, f64, f64)]) -> WindowState {
        let mut s = WindowState::new(1, window);
        for &(slot, p, p_bar) in entries {
            s.set_p(slot, &[p]).unwrap();
            s.set_p_bar(slot, &[p_bar]).unwrap();
        }
        s
    }

    #[test]
    fn gradient_examples() {
        let c = cost1(10.0);
        // equal probabilities everywhere: only the forwarding term remains
        let mut s = state_with(3, &[(1, 0.4, 0.4), (2, 0.4, 0.4), (3, 0.4, 0.4)]);
        s.set_step(1);
        let g = window_gradient(2, &mut s, &[40.0], &c, 10).unwrap();
        assert_abs_diff_eq!(g[0], -0.05 * 40.0, epsilon = 1e-12);

        // p̄_{τ-1} = 0.1, p_τ = 0.12, p_{τ+1} = 0.12, αλ = 1
        let mut s = state_with(3, &[(1, 0.5, 0.1), (2, 0.12, 0.0), (3, 0.12, 0.0)]);
        s.set_step(1);
        let g = window_gradient(2, &mut s, &[20.0], &c, 10).unwrap();
        assert_abs_diff_eq!(g[0], 23.0, epsilon = 1e-9);

        // τ = T drops the forward term
        let mut s = state_with(2, &[(4, 0.9, 0.3), (5, 0.3, 0.0), (6, 0.0, 0.0)]);
        s.set_step(4);
        let g = window_gradient(5, &mut s, &[40.0], &c, 5).unwrap();
        assert_abs_diff_eq!(g[0], -2.0, epsilon = 1e-12);

        assert!(window_gradient(6, &mut s, &[40.0], &c, 5).is_err());
        assert!(window_gradient(3, &mut s, &[40.0], &c, 5).is_err());
    }

    #[test]
    fn zero_step_leaves_p_and_snapshots_it() {
        let c = cost1(10.0).with_eta(0.0).unwrap();
        let trace = ArrivalTrace::new(vec![vec![5.0]; 4]).unwrap();
        let mut s = state_with(2, &[(1, 0.3, 0.0), (2, 0.6, 0.0), (3, 1.0, 0.0)]);
        pgd_window_update(&mut s, &trace, &c, 1, 4).unwrap();
        assert_eq!(s.p(1), &[0.3]);
        assert_eq!(s.p(2), &[0.6]);
        assert_eq!(s.p_bar(1), &[0.3]);
        assert_eq!(s.p_bar(2), &[0.6]);
    }

    #[test]
    fn single_slot_window_is_one_projected_step() {
        let c = CostModel::new(0.05, vec![10.0, 10.0], 1, 0.05).unwrap();
        let trace = ArrivalTrace::new(vec![vec![300.0, 10.0]; 3]).unwrap();
        let mut s = WindowState::new(2, 1);
        s.set_p(2, &[0.5, 0.5]).unwrap();
        s.set_p(3, &[1.0, 0.0]).unwrap();
        s.set_p_bar(1, &[0.4, 0.5]).unwrap();
        pgd_window_update(&mut s, &trace, &c, 2, 3).unwrap();
        let grad: Vec<f64> = (0..2)
            .map(|i| {
                let prev = [0.4, 0.5][i];
                let next = [1.0, 0.0][i];
                g_fn(prev, 0.5, 10.0, 0.05) - 0.05 * [300.0, 10.0][i] - g_fn(0.5, next, 10.0, 0.05)
            })
            .collect();
        let z: Vec<f64> = (0..2).map(|i| 0.5 - c.eta * grad[i]).collect();
        let expected = crate::projection::project_bounded_simplex_oracle(&z, 1).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(s.p(2)[i], expected.as_slice()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn strong_demand_drives_probabilities_to_capacity() {
        let c = CostModel::new(0.05, vec![1.0; 3], 2, 0.05).unwrap();
        let trace = ArrivalTrace::new(vec![vec![1e5, 1e5, 1e5]; 3]).unwrap();
        let mut s = WindowState::new(3, 3);
        pgd_window_update(&mut s, &trace, &c, 1, 3).unwrap();
        for slot in 1..=3 {
            let p = s.p(slot);
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 2.0, epsilon = 1e-9);
            for v in p {
                assert_abs_diff_eq!(*v, 2.0 / 3.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn offline_zero_step_returns_shifted_indicators() {
        let c = cost1(10.0).with_eta(0.0).unwrap();
        let trace = ArrivalTrace::new(vec![vec![3.0], vec![0.0], vec![7.0]]).unwrap();
        let q = offline_pgd(&trace, &c, 5).unwrap();
        let got: Vec<f64> = q.iter().map(|p| p.as_slice()[0]).collect();
        assert_eq!(got, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn offline_single_slot_expansion() {
        let c = CostModel::new(0.05, vec![10.0, 5.0], 1, 0.05).unwrap();
        let trace = ArrivalTrace::new(vec![vec![300.0, 100.0]]).unwrap();
        let q = offline_pgd(&trace, &c, 1).unwrap();
        // Θ_0 = 0, gradient at T = 1 is g(0, 0) − αλ = −αλ
        let z = [c.eta * 0.05 * 300.0, c.eta * 0.05 * 100.0];
        let expected = crate::projection::project_bounded_simplex_oracle(&z, 1).unwrap();
        assert_eq!(q.len(), 1);
        for i in 0..2 {
            assert_abs_diff_eq!(q[0].as_slice()[i], expected.as_slice()[i], epsilon = 1e-15);
        }
    }

    // Central differences of the smoothed switching term against g_fn, away
    // from the breakpoints at 0 and γ.
    proptest! {
        #[test]
        fn g_fn_is_derivative_of_switching_term(
            a in 0.0f64..0.5,
            d in prop_oneof![0.001f64..0.049, 0.051f64..0.5],
            beta in 0.5f64..20.0,
        ) {
            let gamma = 0.05;
            let h = 1e-7;
            let f = |b: f64| aux_switching(b - a, beta, gamma);
            let b = a + d;
            let fd = (f(b + h) - f(b - h)) / (2.0 * h);
            let g = g_fn(a, b, beta, gamma);
            prop_assert!((fd - g).abs() <= 1e-4 * g.abs().max(1.0), "fd={fd} g={g}");
        }

        #[test]
        fn g_fn_monotone_in_difference(a in -1.0f64..1.0, d1 in -0.2f64..0.3, d2 in -0.2f64..0.3) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            // the jump at γ is downward (6β to 3β), so monotonicity holds piecewise
            let gamma = 0.05;
            if !(lo <= gamma && hi > gamma) {
                prop_assert!(g_fn(a, a + lo, 10.0, gamma) <= g_fn(a, a + hi, 10.0, gamma) + 1e-12);
            }
        }
    }
}
