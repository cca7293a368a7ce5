//! Randomized rounding of caching probabilities through `K` sample paths.
//!
//! Each path is a binary caching vector carrying probability mass `1/K`. After
//! the probabilities are floored to multiples of `1/K`, every service is added
//! to (or removed from) just enough randomly chosen paths that its column mean
//! equals the quantized probability. Paths left over capacity then hand
//! services to paths with spare room. The policy follows one path `k*` chosen
//! uniformly at the start of a run.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{check_len, Error, Result};
use crate::model::{CacheVector, ProbVector};

/// Snap distance for floating-point products that land just below an integer.
const SNAP: f64 = 1e-9;

/// Seeded random stream. The same `(seed, stream)` pair always yields the same
/// sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream id derived from a label with 64-bit FNV-1a.
    pub fn labeled(seed: u64, label: &str) -> Self {
        Self::new(seed, stream_id(label))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// 64-bit FNV-1a of `label`.
pub fn stream_id(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Probabilities expressed as path counts out of `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedProbs {
    paths: u32,
    counts: Vec<u32>,
}

impl QuantizedProbs {
    pub fn from_counts(paths: u32, counts: Vec<u32>) -> Result<Self> {
        if paths == 0 {
            return Err(Error::invalid("need at least one sample path"));
        }
        if let Some(c) = counts.iter().find(|c| **c > paths) {
            return Err(Error::invalid(format!("count {c} exceeds K = {paths}")));
        }
        Ok(Self { paths, counts })
    }

    pub fn paths(&self) -> u32 {
        self.paths
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn to_probs(&self) -> ProbVector {
        let k = f64::from(self.paths);
        ProbVector::new_unchecked(self.counts.iter().map(|&c| f64::from(c) / k).collect())
    }
}

/// Floors every probability to a multiple of `1/K`.
///
/// A product `p·K` within `1e-9` below an integer counts as that integer, so
/// values such as `0.29` are not pushed down a level by representation error.
/// If snapping would overrun the capacity, snapped entries are floored again
/// until `Σ counts <= K·M`.
pub fn quantize_probs(p: &[f64], paths: u32, capacity: usize) -> Result<QuantizedProbs> {
    if paths == 0 {
        return Err(Error::invalid("need at least one sample path"));
    }
    let k = f64::from(paths);
    let mut counts = Vec::with_capacity(p.len());
    let mut snapped = Vec::new();
    for (i, &v) in p.iter().enumerate() {
        if !(v >= -SNAP && v <= 1.0 + SNAP) {
            return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
        }
        let scaled = v * k;
        let mut c = scaled.floor();
        if scaled + SNAP >= c + 1.0 {
            c += 1.0;
            snapped.push(i);
        }
        counts.push(c.clamp(0.0, k) as u32);
    }
    let budget = u64::from(paths) * capacity as u64;
    let mut total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    while total > budget {
        let Some(i) = snapped.pop() else {
            return Err(Error::invalid(format!(
                "probabilities exceed capacity {capacity} after quantization"
            )));
        };
        counts[i] -= 1;
        total -= 1;
    }
    Ok(QuantizedProbs { paths, counts })
}

/// Counters from one ensemble update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub added: usize,
    pub removed: usize,
    pub moves: usize,
    /// `Σ_k Σ_n |s_{k,n,t} − s_{k,n,t−1}|₊`.
    pub insertions: usize,
}

/// `K` binary caching vectors of width `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePathEnsemble {
    paths: usize,
    services: usize,
    capacity: usize,
    k_star: usize,
    bits: Vec<u8>,
    row_sums: Vec<usize>,
}

impl SamplePathEnsemble {
    /// Empty paths; draws the followed path `k*` from `rng`.
    pub fn new(paths: usize, services: usize, capacity: usize, rng: &mut impl Rng) -> Result<Self> {
        if paths == 0 || services == 0 {
            return Err(Error::invalid("need K >= 1 paths and N >= 1 services"));
        }
        let k_star = rng.random_range(0..paths);
        Ok(Self {
            paths,
            services,
            capacity,
            k_star,
            bits: vec![0; paths * services],
            row_sums: vec![0; paths],
        })
    }

    /// Rebuilds an ensemble from explicit rows.
    pub fn from_rows(rows: &[Vec<bool>], capacity: usize, k_star: usize) -> Result<Self> {
        let paths = rows.len();
        if paths == 0 || k_star >= paths {
            return Err(Error::invalid("need K >= 1 rows and k* < K"));
        }
        let services = rows[0].len();
        let mut bits = Vec::with_capacity(paths * services);
        let mut row_sums = Vec::with_capacity(paths);
        for row in rows {
            check_len(services, row.len())?;
            bits.extend(row.iter().map(|&b| u8::from(b)));
            row_sums.push(row.iter().filter(|b| **b).count());
        }
        Ok(Self {
            paths,
            services,
            capacity,
            k_star,
            bits,
            row_sums,
        })
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn services(&self) -> usize {
        self.services
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn row(&self, k: usize) -> &[u8] {
        &self.bits[k * self.services..(k + 1) * self.services]
    }

    pub fn row_sum(&self, k: usize) -> usize {
        self.row_sums[k]
    }

    fn get(&self, k: usize, n: usize) -> bool {
        self.bits[k * self.services + n] != 0
    }

    fn set(&mut self, k: usize, n: usize, on: bool) {
        let cell = &mut self.bits[k * self.services + n];
        match (*cell != 0, on) {
            (false, true) => self.row_sums[k] += 1,
            (true, false) => self.row_sums[k] -= 1,
            _ => {}
        }
        *cell = u8::from(on);
    }

    /// Number of paths caching each service.
    pub fn column_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.services];
        for row in self.bits.chunks_exact(self.services) {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += u32::from(b);
            }
        }
        counts
    }

    /// Column means as a probability vector.
    pub fn marginals(&self) -> ProbVector {
        let k = self.paths as f64;
        ProbVector::new_unchecked(self.column_counts().iter().map(|&c| f64::from(c) / k).collect())
    }

    /// Moves the ensemble to the quantized target `pq`.
    pub fn update(&mut self, pq: &QuantizedProbs, rng: &mut impl Rng) -> Result<UpdateStats> {
        check_len(self.services, pq.counts.len())?;
        if pq.paths as usize != self.paths {
            return Err(Error::invalid(format!(
                "target quantized with K = {}, ensemble has K = {}",
                pq.paths, self.paths
            )));
        }
        let before = self.bits.clone();
        let prev = self.column_counts();
        let mut stats = UpdateStats::default();
        let mut pool = Vec::with_capacity(self.paths);

        for n in 0..self.services {
            let (target, have) = (pq.counts[n] as usize, prev[n] as usize);
            if target == have {
                continue;
            }
            let want_on = target > have;
            let amount = target.abs_diff(have);
            pool.clear();
            pool.extend((0..self.paths).filter(|&k| self.get(k, n) != want_on));
            if pool.len() < amount {
                return Err(Error::Internal(format!(
                    "service {n}: need {amount} paths, only {} eligible",
                    pool.len()
                )));
            }
            for i in index::sample(rng, pool.len(), amount) {
                self.set(pool[i], n, want_on);
            }
            if want_on {
                stats.added += amount;
            } else {
                stats.removed += amount;
            }
        }

        let mut deficit = Vec::with_capacity(self.paths);
        let mut movable = Vec::with_capacity(self.services);
        for k in 0..self.paths {
            while self.row_sums[k] > self.capacity {
                deficit.clear();
                deficit.extend((0..self.paths).filter(|&j| self.row_sums[j] < self.capacity));
                if deficit.is_empty() {
                    return Err(Error::Internal(format!(
                        "path {k} over capacity with no path below capacity"
                    )));
                }
                let to = deficit[rng.random_range(0..deficit.len())];
                movable.clear();
                movable.extend((0..self.services).filter(|&n| self.get(k, n) && !self.get(to, n)));
                if movable.is_empty() {
                    return Err(Error::Internal(format!(
                        "no service movable from path {k} to path {to}"
                    )));
                }
                let n = movable[rng.random_range(0..movable.len())];
                self.set(k, n, false);
                self.set(to, n, true);
                stats.moves += 1;
            }
        }

        if self.column_counts() != pq.counts {
            return Err(Error::Internal("column means drifted from the target".into()));
        }
        stats.insertions = before
            .iter()
            .zip(&self.bits)
            .filter(|(b, a)| **b == 0 && **a != 0)
            .count();
        Ok(stats)
    }

    /// The followed path `S_{k*}`.
    pub fn decision(&self) -> CacheVector {
        let row = self.row(self.k_star).iter().map(|&b| b != 0).collect();
        CacheVector::new(row, self.capacity).expect("rows respect capacity after every update")
    }

    /// Row-major `K × N` bits, least significant bit first within each byte.
    pub fn to_bitset(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b != 0 {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bitset(
        bytes: &[u8],
        paths: usize,
        services: usize,
        capacity: usize,
        k_star: usize,
    ) -> Result<Self> {
        check_len((paths * services).div_ceil(8), bytes.len())?;
        let rows: Vec<Vec<bool>> = (0..paths)
            .map(|k| {
                (0..services)
                    .map(|n| {
                        let i = k * services + n;
                        bytes[i / 8] >> (i % 8) & 1 == 1
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(&rows, capacity, k_star)
    }

    pub fn write_bitset(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bitset()).map_err(|e| Error::io(path, e))
    }
}

/// `Σ_k Σ_n |s_{k,n} − p_{k,n}|₊` between two snapshots of the same ensemble.
pub fn insertions_between(prev: &SamplePathEnsemble, cur: &SamplePathEnsemble) -> usize {
    prev.bits
        .iter()
        .zip(&cur.bits)
        .filter(|(b, a)| **b == 0 && **a != 0)
        .count()
}

/// Ensemble-average insertions `(1/K) Σ_t Σ_k Σ_n |s_{k,n,t} − s_{k,n,t−1}|₊`
/// over consecutive snapshots.
pub fn expected_switching(sequence: &[SamplePathEnsemble]) -> f64 {
    let Some(first) = sequence.first() else {
        return 0.0;
    };
    let total: usize = sequence
        .windows(2)
        .map(|w| insertions_between(&w[0], &w[1]))
        .sum();
    total as f64 / first.paths as f64
}

/// `Σ_n |q_n − p_n|₊` for two quantized vectors, in units of probability.
pub fn positive_variation(prev: &QuantizedProbs, cur: &QuantizedProbs) -> f64 {
    let k = f64::from(cur.paths);
    prev.counts
        .iter()
        .zip(&cur.counts)
        .map(|(&a, &b)| f64::from(b.saturating_sub(a)))
        .sum::<f64>()
        / k
}
