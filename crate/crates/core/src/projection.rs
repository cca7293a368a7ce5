//! Euclidean projections onto the simplex and the capped simplex
//! `D = {y ∈ [0,1]^N : Σy ≤ M}`.
//!
//! [`project_bounded_simplex`] clamps to the box and returns early when the
//! capacity is slack. Otherwise it sorts once and binary-searches the number
//! `i*` of coordinates pinned at 1; the remaining tail is the projection of
//! the tail of `z` onto the simplex with budget `M − i*`. Each probe of the
//! search is a linear-time simplex projection, so the whole projection is
//! `O(N log N)`.
//!
//! [`project_bounded_simplex_oracle`] solves the same problem by enumerating
//! KKT active sets and is only meant for validation on small inputs.

use crate::error::{Error, Result};
use crate::model::ProbVector;

/// Sort used by the fast projection. `sort_unstable_by` is pattern-defeating
/// quicksort with a heapsort fallback, so its worst case is `O(N log N)`.
pub const SORT_ALGORITHM: &str = "pdqsort (slice::sort_unstable_by, heapsort fallback)";

/// Tolerance for "some coordinate reaches 1" inside the binary search.
const ONE_TOL: f64 = 1e-12;

/// Largest input the enumeration oracle accepts.
pub const ORACLE_MAX_LEN: usize = 20;

fn check_sorted_input(a: &[f64], c: f64) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Dimension {
            expected: 1,
            found: 0,
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("simplex budget must be positive, got {c}")));
    }
    if a.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("simplex projection input must be sorted descending"));
    }
    Ok(())
}

/// Projection of `a` (sorted descending) onto `{y >= 0 : Σy = c}`.
pub fn project_simplex(a: &[f64], c: f64) -> Result<Vec<f64>> {
    check_sorted_input(a, c)?;
    let tau = threshold_iter(a.iter().copied(), c);
    Ok(a.iter().map(|v| (v - tau).max(0.0)).collect())
}

/// Variant of [`project_simplex`] whose threshold test uses the full sum
/// `Σ_j a_j` instead of prefix sums. Kept only to cross-check the two
/// formulations; it is not a projection in general.
pub fn project_simplex_full_sum(a: &[f64], c: f64) -> Result<Vec<f64>> {
    check_sorted_input(a, c)?;
    let excess = a.iter().sum::<f64>() - c;
    let count = (1..=a.len())
        .filter(|&i| excess / (i as f64) < a[i - 1])
        .max()
        .unwrap_or(1);
    let tau = excess / count as f64;
    Ok(a.iter().map(|v| (v - tau).max(0.0)).collect())
}

/// Whether the prefix-sum and full-sum simplex formulations agree on `a`.
pub fn simplex_variants_agree(a: &[f64], c: f64, tol: f64) -> Result<bool> {
    let x = project_simplex(a, c)?;
    let y = project_simplex_full_sum(a, c)?;
    Ok(x.iter().zip(&y).all(|(u, v)| (u - v).abs() <= tol))
}

fn ceil_log2(m: usize) -> usize {
    (usize::BITS - (m.max(1) - 1).leading_zeros()) as usize
}

/// Reusable buffers for repeated projections of the same dimension.
#[derive(Debug, Default, Clone)]
pub struct BoundedSimplexProjector {
    sorted: Vec<(f64, u32)>,
}

impl BoundedSimplexProjector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Projects `z` onto `D` in place.
    pub fn project_in_place(&mut self, z: &mut [f64], capacity: usize) -> Result<()> {
        if z.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                found: 0,
            });
        }
        if capacity == 0 || capacity > z.len() {
            return Err(Error::invalid(format!(
                "capacity must satisfy 1 <= M <= {}, got {capacity}",
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection input must be finite"));
        }

        let mut clamped_sum = 0.0;
        for v in z.iter_mut() {
            *v = v.max(0.0);
            clamped_sum += v.min(1.0);
        }
        if clamped_sum <= capacity as f64 {
            for v in z.iter_mut() {
                *v = v.min(1.0);
            }
            return Ok(());
        }

        let sorted = &mut self.sorted;
        sorted.clear();
        sorted.extend(z.iter().enumerate().map(|(i, &v)| (v, i as u32)));
        sorted.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let values = |from: usize| sorted[from..].iter().map(|p| p.0);

        let m = capacity;
        let (mut lo, mut hi) = (0usize, m);
        let mut resolved = None;
        for _ in 0..=ceil_log2(m) {
            let mid = (lo + hi) / 2;
            let tau = threshold_iter(values(mid), (m - mid) as f64);
            let reaches_one = sorted[mid].0 - tau >= 1.0 - ONE_TOL;
            if mid == lo {
                resolved = Some(if reaches_one {
                    let budget = (m - hi) as f64;
                    let tau = if budget > 0.0 {
                        threshold_iter(values(hi), budget)
                    } else {
                        f64::INFINITY
                    };
                    (hi, tau)
                } else {
                    (lo, tau)
                });
                break;
            }
            if reaches_one {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (ones, tau) = resolved.ok_or_else(|| {
            Error::Internal("bounded simplex search did not terminate".into())
        })?;

        for (rank, &(v, idx)) in sorted.iter().enumerate() {
            z[idx as usize] = if rank < ones { 1.0 } else { (v - tau).max(0.0) };
        }
        Ok(())
    }
}

/// Threshold `τ` of the simplex projection of `a` (sorted descending) with
/// budget `c > 0`: the last index `i` with `(Σ_{j<=i} a_j − c) / i < a_i`.
fn threshold_iter(a: impl Iterator<Item = f64>, c: f64) -> f64 {
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (i, ai) in a.enumerate() {
        prefix += ai;
        let candidate = (prefix - c) / (i + 1) as f64;
        if candidate < ai {
            tau = candidate;
        }
    }
    tau
}

/// `argmin_{y ∈ D} ‖z − y‖₂`.
pub fn project_bounded_simplex(z: &[f64], capacity: usize) -> Result<ProbVector> {
    let mut y = z.to_vec();
    BoundedSimplexProjector::new().project_in_place(&mut y, capacity)?;
    Ok(ProbVector::new_unchecked(y))
}

/// Exact projection onto `D` by enumerating every partition of the sorted
/// coordinates into `{y = 1}`, `{0 < y < 1}` and `{y = 0}` and keeping the ones
/// that satisfy the KKT conditions. `O(N³)`; limited to `N <= 20`.
pub fn project_bounded_simplex_oracle(z: &[f64], capacity: usize) -> Result<ProbVector> {
    let n = z.len();
    if n == 0 || n > ORACLE_MAX_LEN {
        return Err(Error::invalid(format!(
            "oracle accepts 1..={ORACLE_MAX_LEN} coordinates, got {n}"
        )));
    }
    if capacity == 0 || capacity > n {
        return Err(Error::invalid(format!("capacity {capacity} outside 1..={n}")));
    }
    let scale = 1.0 + z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-11 * scale;
    let m = capacity as f64;

    let mut candidates: Vec<Vec<f64>> = Vec::new();

    // Capacity constraint inactive: multiplier zero, y is the box clamp.
    let clamp: Vec<f64> = z.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if clamp.iter().sum::<f64>() <= m + tol {
        candidates.push(clamp);
    }

    // Capacity constraint active: Σy = M with multiplier rho >= 0.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    let s: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    for ones in 0..=capacity.min(n) {
        for interior in 0..=(n - ones) {
            let (top, rest) = s.split_at(ones);
            let (mid, low) = rest.split_at(interior);
            let rho = if interior > 0 {
                (mid.iter().sum::<f64>() - (m - ones as f64)) / interior as f64
            } else {
                if ones != capacity {
                    continue;
                }
                // any rho in [max(0, max low), min top - 1] works
                let lo = low.iter().fold(0.0f64, |a, &v| a.max(v));
                let hi = top.iter().fold(f64::INFINITY, |a, &v| a.min(v)) - 1.0;
                if lo > hi + tol {
                    continue;
                }
                lo
            };
            let ok = rho >= -tol
                && top.iter().all(|&v| v - 1.0 - rho >= -tol)
                && mid.iter().all(|&v| v - rho >= -tol && v - rho <= 1.0 + tol)
                && low.iter().all(|&v| rho - v >= -tol);
            if !ok {
                continue;
            }
            let mut y = vec![0.0; n];
            for (rank, &i) in order.iter().enumerate() {
                y[i] = if rank < ones {
                    1.0
                } else if rank < ones + interior {
                    (s[rank] - rho).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
            candidates.push(y);
        }
    }

    let first = candidates
        .first()
        .ok_or_else(|| Error::Internal(format!("no KKT-consistent partition for {z:?}")))?;
    for other in &candidates[1..] {
        if first.iter().zip(other).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::Internal(format!(
                "KKT partitions disagree for {z:?}: {first:?} vs {other:?}"
            )));
        }
    }
    Ok(ProbVector::new_unchecked(first.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn simplex_examples() {
        let y = project_simplex(&[0.9, 0.5], 1.0).unwrap();
        assert!(close(&y, &[0.7, 0.3], 1e-12));
        assert_eq!(project_simplex(&[1.0, 0.0, 0.0], 1.0).unwrap(), [1.0, 0.0, 0.0]);
        let y = project_simplex(&[2.0, 2.0, 2.0], 2.0).unwrap();
        assert!(close(&y, &[2.0 / 3.0; 3], 1e-12));
    }

    #[test]
    fn simplex_errors() {
        assert!(matches!(project_simplex(&[], 1.0), Err(Error::Dimension { .. })));
        assert!(project_simplex(&[1.0], 0.0).is_err());
        assert!(project_simplex(&[0.1, 0.5], 1.0).is_err());
    }

    #[test]
    fn simplex_below_budget_uses_negative_threshold() {
        let y = project_simplex(&[0.2, 0.1], 1.0).unwrap();
        assert!(close(&y, &[0.55, 0.45], 1e-12));
    }

    #[test]
    fn full_sum_variant_differs_on_negative_tails() {
        let a = [1.0, 0.0, -10.0];
        assert_eq!(project_simplex(&a, 1.0).unwrap(), [1.0, 0.0, 0.0]);
        assert!(!simplex_variants_agree(&a, 1.0, 1e-9).unwrap());
        // both agree when nothing is clipped
        assert!(simplex_variants_agree(&[0.9, 0.5], 1.0, 1e-12).unwrap());
    }

    #[test]
    fn bounded_examples() {
        let y = project_bounded_simplex(&[1.5, 0.6, 0.1], 2).unwrap();
        assert!(close(y.as_slice(), &[1.0, 0.6, 0.1], 1e-15));
        let y = project_bounded_simplex(&[1.2, 1.1, 0.9, 0.1], 2).unwrap();
        assert!(close(y.as_slice(), &[0.8, 0.7, 0.5, 0.0], 1e-12));
        let y = project_bounded_simplex(&[2.0, 2.0, 2.0], 2).unwrap();
        assert!(close(y.as_slice(), &[2.0 / 3.0; 3], 1e-12));
        // everything pinned: two ones and a zero
        let y = project_bounded_simplex(&[5.0, 5.0, 0.1], 2).unwrap();
        assert!(close(y.as_slice(), &[1.0, 1.0, 0.0], 1e-12));
    }

    #[test]
    fn bounded_restores_original_order() {
        let y = project_bounded_simplex(&[0.1, 1.1, 0.9, 1.2], 2).unwrap();
        assert!(close(y.as_slice(), &[0.0, 0.7, 0.5, 0.8], 1e-12));
    }

    #[test]
    fn bounded_argument_errors() {
        assert!(project_bounded_simplex(&[], 1).is_err());
        assert!(project_bounded_simplex(&[1.0], 0).is_err());
        assert!(project_bounded_simplex(&[1.0], 2).is_err());
        assert!(project_bounded_simplex(&[f64::NAN, 1.0], 1).is_err());
    }

    #[test]
    fn oracle_examples() {
        let y = project_bounded_simplex_oracle(&[1.2, 1.1, 0.9, 0.1], 2).unwrap();
        assert!(close(y.as_slice(), &[0.8, 0.7, 0.5, 0.0], 1e-12));
        for m in 1..=4 {
            let y = project_bounded_simplex_oracle(&[-1.0, -0.5, 0.0, -3.0], m).unwrap();
            assert_eq!(y.as_slice(), &[0.0; 4]);
        }
        assert!(project_bounded_simplex_oracle(&[0.0; 21], 1).is_err());
    }

    #[test]
    fn oracle_matches_fast_projection_on_gaussian_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.random_range(2..=12);
            let m = rng.random_range(1..=n);
            let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let fast = project_bounded_simplex(&z, m).unwrap();
            let slow = project_bounded_simplex_oracle(&z, m).unwrap();
            assert!(
                close(fast.as_slice(), slow.as_slice(), 1e-9),
                "z={z:?} m={m} fast={fast:?} slow={slow:?}"
            );
        }
    }

    #[test]
    fn search_depth_covers_capacity() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
    }

    fn arb_z() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (1usize..16).prop_flat_map(|n| {
            (prop::collection::vec(-2.0f64..3.0, n), 1..=n)
        })
    }

    proptest! {
        #[test]
        fn output_is_feasible((z, m) in arb_z()) {
            let y = project_bounded_simplex(&z, m).unwrap();
            prop_assert!(y.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(y.as_slice().iter().sum::<f64>() <= m as f64 + 1e-9);
        }

        #[test]
        fn idempotent((z, m) in arb_z()) {
            let y = project_bounded_simplex(&z, m).unwrap();
            let yy = project_bounded_simplex(y.as_slice(), m).unwrap();
            prop_assert!(close(y.as_slice(), yy.as_slice(), 1e-12));
        }

        #[test]
        fn non_expansive((z1, m) in arb_z(), shift in prop::collection::vec(-1.0f64..1.0, 16)) {
            let z2: Vec<f64> = z1.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let y1 = project_bounded_simplex(&z1, m).unwrap();
            let y2 = project_bounded_simplex(&z2, m).unwrap();
            let dy: f64 = y1.as_slice().iter().zip(y2.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
            let dz: f64 = z1.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(dy.sqrt() <= dz.sqrt() + 1e-12);
        }

        #[test]
        fn preserves_descending_order((mut z, m) in arb_z()) {
            z.sort_by(|a, b| b.total_cmp(a));
            let y = project_bounded_simplex(&z, m).unwrap();
            prop_assert!(y.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn matches_oracle((z, m) in arb_z()) {
            let fast = project_bounded_simplex(&z, m).unwrap();
            let slow = project_bounded_simplex_oracle(&z, m).unwrap();
            prop_assert!(close(fast.as_slice(), slow.as_slice(), 1e-9));
        }
    }

    #[test]
    fn projector_reuse_gives_same_answer() {
        let mut p = BoundedSimplexProjector::new();
        let mut a = vec![1.2, 1.1, 0.9, 0.1];
        p.project_in_place(&mut a, 2).unwrap();
        let mut b = vec![0.3, 2.0, 0.2];
        p.project_in_place(&mut b, 1).unwrap();
        assert_abs_diff_eq!(a[0], 0.8, epsilon = 1e-12);
        assert_eq!(b, [0.0, 1.0, 0.0]);
    }
}
