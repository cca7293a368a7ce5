//! Synthetic request traces and the noisy prediction oracle.
//!
//! * Replacement model: Zipf popularity over a set of ranks whose occupants are
//!   replaced after random dwell times.
//! * Poisson model: services are born per group by a Poisson process and stay
//!   active for the group lifetime.
//! * Piecewise model: a Zipf ranking that is redrawn at a fixed number of evenly
//!   spaced switch points, with sparse one-slot bursts, for controlled
//!   non-stationarity.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Geometric, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArrivalTrace, TraceMeta};
use crate::sampler::RngStream;

/// How long a service keeps its popularity rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifetime {
    /// `1 + Geometric` slots, with the given mean.
    Geometric { mean: f64 },
    Fixed { slots: u64 },
    Never,
}

impl Lifetime {
    fn draw(&self, rng: &mut impl Rng) -> Result<u64> {
        match *self {
            Lifetime::Geometric { mean } => {
                if !(mean >= 1.0) {
                    return Err(Error::invalid(format!("mean lifetime {mean} below one slot")));
                }
                if mean.is_infinite() {
                    return Ok(u64::MAX);
                }
                let g = Geometric::new(1.0 / mean).map_err(|e| Error::invalid(e.to_string()))?;
                Ok(1 + g.sample(rng))
            }
            Lifetime::Fixed { slots } if slots == 0 => Err(Error::invalid("fixed lifetime of 0 slots")),
            Lifetime::Fixed { slots } => Ok(slots),
            Lifetime::Never => Ok(u64::MAX),
        }
    }
}

/// How per-slot request counts are produced from the Zipf shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMode {
    /// Largest-remainder apportionment of `U`; every slot totals exactly `U`.
    Exact,
    /// `U` independent requests over the ranks, each kept with probability `keep`.
    Thinned { keep: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ReplacementParams {
    pub N: usize,
    pub T: usize,
    pub U: u64,
    pub zipf_exponent: f64,
    /// Number of ranked services; the rest wait in the unranked pool.
    pub ranks: Option<usize>,
    pub lifetime: Lifetime,
    pub volume: VolumeMode,
}

impl Default for ReplacementParams {
    fn default() -> Self {
        Self {
            N: 1000,
            T: 10_000,
            U: 200,
            zipf_exponent: 0.8,
            ranks: None,
            lifetime: Lifetime::Geometric { mean: 100.0 },
            volume: VolumeMode::Exact,
        }
    }
}

impl ReplacementParams {
    pub fn rank_count(&self) -> usize {
        self.ranks.unwrap_or(self.N / 2).clamp(1, self.N.max(1))
    }
}

/// Zipf weights `r^{−s}` for ranks `1..=ranks`, normalized.
pub fn zipf_shares(ranks: usize, exponent: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=ranks).map(|r| (r as f64).powf(-exponent)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Splits `total` into integers proportional to `shares` (largest remainder,
/// ties to the lower index).
pub fn apportion(total: u64, shares: &[f64]) -> Vec<u64> {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

fn check_shape(n: usize, t: usize) -> Result<()> {
    if n == 0 || t == 0 {
        return Err(Error::invalid("need N >= 1 services and T >= 1 slots"));
    }
    Ok(())
}

fn fill_slot(
    row: &mut [f64],
    occupants: &[usize],
    counts: &[u64],
    volume: VolumeMode,
    picker: Option<&WeightedIndex<f64>>,
    total: u64,
    rng: &mut impl Rng,
) {
    match (volume, picker) {
        (VolumeMode::Thinned { keep }, Some(picker)) => {
            for _ in 0..total {
                let r = picker.sample(rng);
                if rng.random_bool(keep) {
                    row[occupants[r]] += 1.0;
                }
            }
        }
        _ => {
            for (&s, &c) in occupants.iter().zip(counts) {
                row[s] = c as f64;
            }
        }
    }
}

fn volume_picker(volume: VolumeMode, shares: &[f64]) -> Result<Option<WeightedIndex<f64>>> {
    match volume {
        VolumeMode::Exact => Ok(None),
        VolumeMode::Thinned { keep } => {
            if !(0.0..=1.0).contains(&keep) {
                return Err(Error::invalid(format!("keep probability {keep} outside [0, 1]")));
            }
            WeightedIndex::new(shares)
                .map(Some)
                .map_err(|e| Error::invalid(e.to_string()))
        }
    }
}

/// Replacement-model trace.
pub fn gen_replacement(params: &ReplacementParams, seed: u64) -> Result<ArrivalTrace> {
    let (n, t) = (params.N, params.T);
    check_shape(n, t)?;
    if !(params.zipf_exponent > 0.0) {
        return Err(Error::invalid("Zipf exponent must be positive"));
    }
    let ranks = params.rank_count();
    let shares = zipf_shares(ranks, params.zipf_exponent);
    let counts = apportion(params.U, &shares);
    let picker = volume_picker(params.volume, &shares)?;
    let mut rng = RngStream::labeled(seed, "replacement");

    let mut occupants: Vec<usize> = index::sample(&mut rng, n, ranks).into_vec();
    let mut ranked = vec![false; n];
    for &s in &occupants {
        ranked[s] = true;
    }
    let mut pool: Vec<usize> = (0..n).filter(|&s| !ranked[s]).collect();
    let mut expiry = Vec::with_capacity(ranks);
    for _ in 0..ranks {
        expiry.push(params.lifetime.draw(&mut rng)?);
    }

    let mut data = vec![0.0; n * t];
    for slot in 0..t {
        if slot > 0 {
            for r in 0..ranks {
                expiry[r] = expiry[r].saturating_sub(1);
                if expiry[r] > 0 {
                    continue;
                }
                if !pool.is_empty() {
                    let i = rng.random_range(0..pool.len());
                    std::mem::swap(&mut occupants[r], &mut pool[i]);
                }
                expiry[r] = params.lifetime.draw(&mut rng)?;
            }
        }
        let row = &mut data[slot * n..(slot + 1) * n];
        fill_slot(row, &occupants, &counts, params.volume, picker.as_ref(), params.U, &mut rng);
    }
    ArrivalTrace::from_flat(t, n, data)?.with_cap(params.U as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    /// Slots a service stays active after birth.
    pub lifetime: u64,
    /// Expected births per slot.
    pub birth_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PoissonParams {
    pub N: usize,
    pub T: usize,
    pub groups: Vec<GroupParams>,
    /// Mean requests per slot of an active service before the popularity factor.
    pub per_service_volume: f64,
    /// Log-normal spread of the per-service popularity factor (mean one).
    pub popularity_sigma: f64,
}

impl Default for PoissonParams {
    fn default() -> Self {
        let group = |lifetime, birth_rate| GroupParams { lifetime, birth_rate };
        Self {
            N: 1000,
            T: 10_000,
            groups: vec![
                group(2000, 0.005),
                group(1000, 0.01),
                group(500, 0.02),
                group(200, 0.05),
                group(100, 0.1),
            ],
            per_service_volume: 4.0,
            popularity_sigma: 1.5,
        }
    }
}

struct Active {
    id: usize,
    until: i64,
    mean: f64,
}

/// Poisson-model trace. The process starts one maximal lifetime before slot 1
/// so the active population is already in steady state. When every id is
/// taken, the oldest expired id is reused; births beyond `N` live services are
/// dropped.
pub fn gen_poisson(params: &PoissonParams, seed: u64) -> Result<ArrivalTrace> {
    let (n, t) = (params.N, params.T);
    check_shape(n, t)?;
    for g in &params.groups {
        if !(g.birth_rate >= 0.0 && g.birth_rate.is_finite()) || g.lifetime == 0 {
            return Err(Error::invalid(format!("bad group {g:?}")));
        }
    }
    if !(params.per_service_volume >= 0.0) || !(params.popularity_sigma >= 0.0) {
        return Err(Error::invalid("volume and popularity spread must be nonnegative"));
    }
    let mut rng = RngStream::labeled(seed, "poisson");
    let births: Vec<Option<Poisson<f64>>> = params
        .groups
        .iter()
        .map(|g| {
            (g.birth_rate > 0.0)
                .then(|| Poisson::new(g.birth_rate).map_err(|e| Error::invalid(e.to_string())))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let sigma = params.popularity_sigma;

    let mut free: VecDeque<usize> = (0..n).collect();
    let mut active: Vec<Active> = Vec::new();
    let warmup = params.groups.iter().map(|g| g.lifetime).max().unwrap_or(0) as i64;
    let mut data = vec![0.0; n * t];
    for slot in (1 - warmup)..=(t as i64) {
        active.retain(|a| {
            let alive = a.until >= slot;
            if !alive {
                free.push_back(a.id);
            }
            alive
        });
        for (g, dist) in params.groups.iter().zip(&births) {
            let Some(dist) = dist else { continue };
            let born = dist.sample(&mut rng) as u64;
            for _ in 0..born {
                let Some(id) = free.pop_front() else { break };
                let z: f64 = rng.sample(StandardNormal);
                active.push(Active {
                    id,
                    until: slot + g.lifetime as i64 - 1,
                    mean: params.per_service_volume * (sigma * z - sigma * sigma / 2.0).exp(),
                });
            }
        }
        if slot < 1 {
            continue;
        }
        let row = &mut data[(slot as usize - 1) * n..slot as usize * n];
        for a in &active {
            if a.mean > 0.0 {
                let d = Poisson::new(a.mean).map_err(|e| Error::invalid(e.to_string()))?;
                row[a.id] = d.sample(&mut rng);
            }
        }
    }
    ArrivalTrace::from_flat(t, n, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PiecewiseParams {
    pub N: usize,
    pub T: usize,
    pub U: u64,
    pub zipf_exponent: f64,
    pub ranks: Option<usize>,
    /// Number of ranking switches is `round(switch_scale · √T)`.
    pub switch_scale: f64,
    /// Number of one-slot bursts is `round(burst_scale · √T)`. A burst gives one
    /// random service `burst_factor` times the rank-1 volume for a single slot.
    #[serde(default)]
    pub burst_scale: f64,
    #[serde(default = "default_burst_factor")]
    pub burst_factor: f64,
}

fn default_burst_factor() -> f64 {
    2.0
}

impl Default for PiecewiseParams {
    fn default() -> Self {
        Self {
            N: 100,
            T: 1000,
            U: 200,
            zipf_exponent: 0.8,
            ranks: None,
            switch_scale: 0.5,
            burst_scale: 2.0,
            burst_factor: default_burst_factor(),
        }
    }
}

impl PiecewiseParams {
    pub fn switches(&self) -> usize {
        (self.switch_scale * (self.T as f64).sqrt()).round() as usize
    }

    pub fn bursts(&self) -> usize {
        (self.burst_scale * (self.T as f64).sqrt()).round() as usize
    }
}

/// Piecewise-stationary Zipf trace: exact apportionment of `U` over a random
/// ranking that is redrawn at evenly spaced switch slots, plus optional
/// one-slot bursts at uniformly drawn slots.
pub fn gen_piecewise(params: &PiecewiseParams, seed: u64) -> Result<ArrivalTrace> {
    let (n, t) = (params.N, params.T);
    check_shape(n, t)?;
    if !(params.zipf_exponent > 0.0) {
        return Err(Error::invalid("Zipf exponent must be positive"));
    }
    let ranks = params.ranks.unwrap_or(n / 2).clamp(1, n);
    let counts = apportion(params.U, &zipf_shares(ranks, params.zipf_exponent));
    let switches = params.switches();
    let mut rng = RngStream::labeled(seed, "piecewise");
    let mut occupants = index::sample(&mut rng, n, ranks).into_vec();
    let mut next_switch = 1;
    let mut data = vec![0.0; n * t];
    for slot in 0..t {
        while next_switch <= switches && slot >= next_switch * t / (switches + 1) {
            occupants = index::sample(&mut rng, n, ranks).into_vec();
            next_switch += 1;
        }
        for (&s, &c) in occupants.iter().zip(&counts) {
            data[slot * n + s] = c as f64;
        }
    }
    let burst = params.burst_factor * counts[0] as f64;
    for _ in 0..params.bursts() {
        let (slot, s) = (rng.random_range(0..t), rng.random_range(0..n));
        data[slot * n + s] = data[slot * n + s].max(burst);
    }
    ArrivalTrace::from_flat(t, n, data)
}

/// Any generator, as accepted in a JSON parameter document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GeneratorParams {
    Replacement(ReplacementParams),
    Poisson(PoissonParams),
    Piecewise(PiecewiseParams),
}

impl GeneratorParams {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorParams::Replacement(_) => "replacement",
            GeneratorParams::Poisson(_) => "poisson",
            GeneratorParams::Piecewise(_) => "piecewise",
        }
    }

    pub fn generate(&self, seed: u64) -> Result<ArrivalTrace> {
        match self {
            GeneratorParams::Replacement(p) => gen_replacement(p, seed),
            GeneratorParams::Poisson(p) => gen_poisson(p, seed),
            GeneratorParams::Piecewise(p) => gen_piecewise(p, seed),
        }
    }

    /// Sidecar describing a trace produced by [`Self::generate`].
    pub fn meta(&self, trace: &ArrivalTrace, seed: u64) -> Result<TraceMeta> {
        let mut params = serde_json::to_value(self)?;
        if let Some(obj) = params.as_object_mut() {
            obj.remove("model");
        }
        Ok(TraceMeta {
            T: trace.horizon(),
            N: trace.services(),
            U: trace.cap_or_max(),
            seed,
            generator: self.name().to_string(),
            params,
        })
    }
}

/// Predictions `λ̂_{n,t}(τ) = max(0, λ_{n,t}·(1 + R·Σ_{s=τ}^{t} e_n(s)))`.
///
/// The per-step noises `e_n(s)` are standard normal, drawn once per oracle for
/// every slot from `1 − lead` to `T`, so repeated queries agree and the error
/// for a fixed target shrinks as `τ` approaches `t`.
#[derive(Debug, Clone)]
pub struct PredictionOracle<'a> {
    trace: &'a ArrivalTrace,
    noise_weight: f64,
    first_slot: i64,
    /// `cum[(s − first_slot + 1)·N + n] = Σ_{first_slot ≤ u ≤ s} e_n(u)`.
    cum: Vec<f64>,
}

impl<'a> PredictionOracle<'a> {
    /// Predictions equal the trace.
    pub fn exact(trace: &'a ArrivalTrace) -> Self {
        Self {
            trace,
            noise_weight: 0.0,
            first_slot: i64::MIN,
            cum: Vec::new(),
        }
    }

    /// Noisy oracle answering queries made from slot `1 − lead` onwards.
    pub fn noisy(trace: &'a ArrivalTrace, noise_weight: f64, lead: usize, seed: u64) -> Result<Self> {
        if !(noise_weight >= 0.0 && noise_weight.is_finite()) {
            return Err(Error::invalid(format!("noise weight {noise_weight} must be >= 0")));
        }
        if noise_weight == 0.0 {
            return Ok(Self::exact(trace));
        }
        let n = trace.services();
        let slots = trace.horizon() + lead;
        let mut rng = RngStream::labeled(seed, "prediction-noise");
        let noise = (0..slots * n).map(|_| rng.sample(StandardNormal)).collect();
        Self::with_noise(trace, noise_weight, 1 - lead as i64, noise)
    }

    /// Uses the given per-step noises, slot-major from `first_slot` to `T`.
    pub fn with_noise(
        trace: &'a ArrivalTrace,
        noise_weight: f64,
        first_slot: i64,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let n = trace.services();
        let slots = (trace.horizon() as i64 - first_slot + 1).max(0) as usize;
        crate::error::check_len(slots * n, noise.len())?;
        let mut cum = vec![0.0; (slots + 1) * n];
        for s in 0..slots {
            for i in 0..n {
                cum[(s + 1) * n + i] = cum[s * n + i] + noise[s * n + i];
            }
        }
        Ok(Self {
            trace,
            noise_weight,
            first_slot,
            cum,
        })
    }

    pub fn trace(&self) -> &'a ArrivalTrace {
        self.trace
    }

    pub fn noise_weight(&self) -> f64 {
        self.noise_weight
    }

    pub fn is_exact(&self) -> bool {
        self.noise_weight == 0.0
    }

    fn noise_sum(&self, n: usize, t: i64, tau: i64) -> Result<f64> {
        let horizon = self.trace.horizon();
        if tau < self.first_slot {
            return Err(Error::PredictionExhausted { slot: tau, horizon });
        }
        let width = self.trace.services();
        let at = |s: i64| self.cum[(s - self.first_slot + 1) as usize * width + n];
        Ok(at(t) - at(tau - 1))
    }

    /// Prediction made at slot `tau` of the arrivals of service `n` at `t`.
    /// Slots outside `1..=T` have no arrivals.
    pub fn predict(&self, n: usize, t: i64, tau: i64) -> Result<f64> {
        if tau > t {
            return Err(Error::invalid(format!("prediction target {t} precedes current slot {tau}")));
        }
        if n >= self.trace.services() {
            return Err(Error::invalid(format!("service {n} out of range")));
        }
        let lambda = self.trace.arrivals(t)[n];
        if self.is_exact() || lambda == 0.0 {
            return Ok(lambda);
        }
        let sum = self.noise_sum(n, t, tau)?;
        Ok((lambda * (1.0 + self.noise_weight * sum)).max(0.0))
    }

    /// `Λ̂_t` as seen from slot `tau`, written into `out`.
    pub fn predict_row(&self, t: i64, tau: i64, out: &mut [f64]) -> Result<()> {
        crate::error::check_len(self.trace.services(), out.len())?;
        if tau > t {
            return Err(Error::invalid(format!("prediction target {t} precedes current slot {tau}")));
        }
        let row = self.trace.arrivals(t);
        if self.is_exact() || row.iter().all(|&l| l == 0.0) {
            out.copy_from_slice(row);
            return Ok(());
        }
        let horizon = self.trace.horizon();
        if tau < self.first_slot {
            return Err(Error::PredictionExhausted { slot: tau, horizon });
        }
        let width = self.trace.services();
        let hi = (t - self.first_slot + 1) as usize * width;
        let lo = (tau - self.first_slot) as usize * width;
        for (i, o) in out.iter_mut().enumerate() {
            let sum = self.cum[hi + i] - self.cum[lo + i];
            *o = (row[i] * (1.0 + self.noise_weight * sum)).max(0.0);
        }
        Ok(())
    }
}
