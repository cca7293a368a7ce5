//! Domain types and the true cost of a caching schedule.
//!
//! Slots are numbered `1..=T`. Every quantity at a slot outside that range
//! (warm-up slots `t <= 0` and look-ahead beyond the horizon) is zero.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Numerical slack allowed on the capacity constraint of a [`ProbVector`].
pub const CAPACITY_TOL: f64 = 1e-9;

/// Request counts `λ[t][n]` for `T` slots and `N` services.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTrace {
    horizon: usize,
    services: usize,
    lambda: Vec<f64>,
    cap: Option<f64>,
    zeros: Vec<f64>,
}

impl ArrivalTrace {
    /// Builds a trace from one row per slot.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = rows.len();
        if horizon == 0 {
            return Err(Error::invalid("trace needs at least one slot"));
        }
        let services = rows[0].len();
        let mut lambda = Vec::with_capacity(horizon * services);
        for row in rows {
            check_len(services, row.len())?;
            lambda.extend(row);
        }
        Self::from_flat(horizon, services, lambda)
    }

    /// Builds a trace from a row-major `T × N` buffer.
    pub fn from_flat(horizon: usize, services: usize, lambda: Vec<f64>) -> Result<Self> {
        if horizon == 0 || services == 0 {
            return Err(Error::invalid("trace needs T >= 1 and N >= 1"));
        }
        check_len(horizon * services, lambda.len())?;
        if let Some(bad) = lambda.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "arrival counts must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self {
            horizon,
            services,
            lambda,
            cap: None,
            zeros: vec![0.0; services],
        })
    }

    /// Declares a per-slot request cap `U`; fails if some slot exceeds it.
    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        let worst = self.max_slot_total();
        if worst > cap {
            return Err(Error::invalid(format!(
                "slot total {worst} exceeds the declared cap {cap}"
            )));
        }
        self.cap = Some(cap);
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn services(&self) -> usize {
        self.services
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    /// Arrivals of slot `t`, zero for slots outside `1..=T`.
    pub fn arrivals(&self, t: i64) -> &[f64] {
        if t < 1 || t as usize > self.horizon {
            &self.zeros
        } else {
            let start = (t as usize - 1) * self.services;
            &self.lambda[start..start + self.services]
        }
    }

    /// Rows in slot order, `rows().nth(0)` being slot 1.
    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.lambda.chunks_exact(self.services)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.lambda
    }

    /// `max_t Σ_n λ[t][n]`.
    pub fn max_slot_total(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Declared cap, or the empirical maximum slot total when none was declared.
    pub fn cap_or_max(&self) -> f64 {
        self.cap.unwrap_or_else(|| self.max_slot_total())
    }

    /// `Σ_t λ[t][n]` for every service.
    pub fn service_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.services];
        for row in self.rows() {
            for (acc, v) in totals.iter_mut().zip(row) {
                *acc += v;
            }
        }
        totals
    }

    pub fn total_requests(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// Returns a copy with slot `t`'s arrivals replaced.
    pub fn with_row(&self, t: usize, row: &[f64]) -> Result<Self> {
        check_len(self.services, row.len())?;
        if t < 1 || t > self.horizon {
            return Err(Error::invalid(format!("slot {t} outside 1..={}", self.horizon)));
        }
        let mut lambda = self.lambda.clone();
        let start = (t - 1) * self.services;
        lambda[start..start + self.services].copy_from_slice(row);
        let mut out = Self::from_flat(self.horizon, self.services, lambda)?;
        out.cap = None;
        Ok(out)
    }

    /// CSV body: header `t,s1,...,sN` and one row per slot.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.lambda.len() * 4 + 16);
        out.push('t');
        for n in 1..=self.services {
            out.push_str(&format!(",s{n}"));
        }
        out.push('\n');
        for (t, row) in self.rows().enumerate() {
            out.push_str(&(t + 1).to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("t") {
            return Err(Error::Parse("first column must be `t`".into()));
        }
        let services = headers.len() - 1;
        for (i, h) in headers.iter().skip(1).enumerate() {
            if h != format!("s{}", i + 1) {
                return Err(Error::Parse(format!("unexpected column header `{h}`")));
            }
        }
        let mut lambda = Vec::new();
        let mut horizon = 0;
        for record in reader.records() {
            let record = record?;
            horizon += 1;
            let t: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad slot index `{}`", &record[0])))?;
            if t != horizon {
                return Err(Error::Parse(format!("expected slot {horizon}, found {t}")));
            }
            for field in record.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad arrival count `{field}`")))?;
                lambda.push(v);
            }
        }
        Self::from_flat(horizon, services, lambda)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }
}

/// JSON sidecar written next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TraceMeta {
    pub T: usize,
    pub N: usize,
    pub U: f64,
    pub seed: u64,
    pub generator: String,
    pub params: serde_json::Value,
}

impl TraceMeta {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Prices and tuning knobs shared by every policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Price of one forwarded request.
    pub alpha: f64,
    /// Instantiation price per service.
    pub beta: Vec<f64>,
    /// Cache capacity `M`.
    pub capacity: usize,
    /// Width of the quadratic smoothing region of the auxiliary cost.
    pub gamma: f64,
    /// Step size of projected gradient descent.
    pub eta: f64,
}

impl CostModel {
    /// Cost model with the step size `γ / (12 β*)`.
    pub fn new(alpha: f64, beta: Vec<f64>, capacity: usize, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if beta.is_empty() {
            return Err(Error::invalid("beta needs one entry per service"));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::invalid(format!("beta entries must be nonnegative, got {b}")));
        }
        if capacity == 0 || capacity > beta.len() {
            return Err(Error::invalid(format!(
                "capacity must satisfy 1 <= M <= N = {}, got {capacity}",
                beta.len()
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        let beta_star = beta.iter().copied().fold(0.0, f64::max);
        let eta = if beta_star > 0.0 {
            gamma / (12.0 * beta_star)
        } else {
            // no switching price: the auxiliary cost is linear, any step works
            gamma / 12.0
        };
        Ok(Self {
            alpha,
            beta,
            capacity,
            gamma,
            eta,
        })
    }

    /// Same instantiation price `beta_star` for all `services`.
    pub fn uniform(
        alpha: f64,
        beta_star: f64,
        services: usize,
        capacity: usize,
        gamma: f64,
    ) -> Result<Self> {
        Self::new(alpha, vec![beta_star; services], capacity, gamma)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::invalid(format!("eta must be nonnegative, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    /// Replaces `γ` and resets `η` to `γ / (12 β*)`.
    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, self.capacity, gamma)
    }

    pub fn services(&self) -> usize {
        self.beta.len()
    }

    /// `β* = max_n β_n`.
    pub fn beta_star(&self) -> f64 {
        self.beta.iter().copied().fold(0.0, f64::max)
    }
}

/// Integral caching decision with at most `M` services.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheVector(Vec<bool>);

impl CacheVector {
    pub fn new(x: Vec<bool>, capacity: usize) -> Result<Self> {
        let cached = x.iter().filter(|b| **b).count();
        if cached > capacity {
            return Err(Error::invalid(format!(
                "{cached} services cached with capacity {capacity}"
            )));
        }
        Ok(Self(x))
    }

    pub fn empty(services: usize) -> Self {
        Self(vec![false; services])
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Fractional caching distribution in `{p ∈ [0,1]^N : Σp ≤ M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>, capacity: usize) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if sum > capacity as f64 + CAPACITY_TOL {
            return Err(Error::invalid(format!(
                "probabilities sum to {sum}, above capacity {capacity}"
            )));
        }
        Ok(Self(p))
    }

    /// Wraps a vector the caller already knows to be feasible.
    pub(crate) fn new_unchecked(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn zeros(services: usize) -> Self {
        Self(vec![0.0; services])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Membership of each service in one slot's top-`M` by arrivals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopMIndicator(Vec<bool>);

impl TopMIndicator {
    pub fn as_bits(&self) -> &[bool] {
        &self.0
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// L1 distance between two indicators.
    pub fn distance(&self, other: &TopMIndicator) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// `α Σ_n λ_n (1 − x_n)`.
pub fn forwarding_cost(lambda: &[f64], x: &[f64], alpha: f64) -> Result<f64> {
    check_len(lambda.len(), x.len())?;
    Ok(alpha * lambda.iter().zip(x).map(|(l, x)| l * (1.0 - x)).sum::<f64>())
}

/// `Σ_n β_n max(x_n − x_prev_n, 0)`; evictions are free.
pub fn switching_cost(x_prev: &[f64], x_cur: &[f64], beta: &[f64]) -> Result<f64> {
    check_len(x_prev.len(), x_cur.len())?;
    check_len(x_prev.len(), beta.len())?;
    Ok(x_prev
        .iter()
        .zip(x_cur)
        .zip(beta)
        .map(|((p, c), b)| b * (c - p).max(0.0))
        .sum())
}

/// Forwarding and switching cost of a single slot.
pub fn slot_cost(
    lambda: &[f64],
    x_prev: &[f64],
    x_cur: &[f64],
    cost: &CostModel,
) -> Result<(f64, f64)> {
    Ok((
        forwarding_cost(lambda, x_cur, cost.alpha)?,
        switching_cost(x_prev, x_cur, &cost.beta)?,
    ))
}

/// Per-slot `(forwarding, switching)` costs of a schedule, with `X_0 = 0`.
pub fn slot_costs(
    trace: &ArrivalTrace,
    decisions: &[Vec<f64>],
    cost: &CostModel,
) -> Result<Vec<(f64, f64)>> {
    check_len(trace.horizon(), decisions.len())?;
    check_len(trace.services(), cost.services())?;
    let zeros = vec![0.0; trace.services()];
    let mut prev: &[f64] = &zeros;
    let mut out = Vec::with_capacity(decisions.len());
    for (row, x) in trace.rows().zip(decisions) {
        out.push(slot_cost(row, prev, x, cost)?);
        prev = x;
    }
    Ok(out)
}

/// `Σ_t F_t(X_t, X_{t-1})` with `X_0 = 0`. Fractional decisions are costed as is.
pub fn total_cost(trace: &ArrivalTrace, decisions: &[Vec<f64>], cost: &CostModel) -> Result<f64> {
    Ok(slot_costs(trace, decisions, cost)?
        .into_iter()
        .map(|(f, s)| f + s)
        .sum())
}

/// Orders services by arrivals descending, lower index first on ties.
fn popularity_order(lambda: &[f64], a: usize, b: usize) -> Ordering {
    lambda[b].total_cmp(&lambda[a]).then(a.cmp(&b))
}

/// The `M` services with the most arrivals; services with zero arrivals are
/// never included, so the indicator can have fewer than `M` ones.
pub fn top_m_indicator(lambda: &[f64], capacity: usize) -> TopMIndicator {
    let n = lambda.len();
    let mut theta = vec![false; n];
    let positive: Vec<usize> = (0..n).filter(|&i| lambda[i] > 0.0).collect();
    if positive.len() <= capacity {
        for i in positive {
            theta[i] = true;
        }
        return TopMIndicator(theta);
    }
    let mut idx = positive;
    if capacity > 0 {
        idx.select_nth_unstable_by(capacity - 1, |&a, &b| popularity_order(lambda, a, b));
        for &i in &idx[..capacity] {
            theta[i] = true;
        }
    }
    TopMIndicator(theta)
}

/// `Θ_1, …, Θ_T` for a trace.
pub fn indicator_sequence(trace: &ArrivalTrace, capacity: usize) -> Vec<TopMIndicator> {
    trace.rows().map(|r| top_m_indicator(r, capacity)).collect()
}

/// `H_T = Σ_t ‖Θ_t − Θ_{t−1}‖₁` with `Θ_0 = 0`.
pub fn path_length(trace: &ArrivalTrace, capacity: usize) -> f64 {
    let mut prev = TopMIndicator(vec![false; trace.services()]);
    let mut total = 0usize;
    for row in trace.rows() {
        let cur = top_m_indicator(row, capacity);
        total += cur.distance(&prev);
        prev = cur;
    }
    total as f64
}
