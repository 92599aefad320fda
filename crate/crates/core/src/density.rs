//! Counting functions and Schnirelmann densities over finite windows.
//!
//! All densities are exact rationals. A finite window can only see
//! `min_{1 <= n <= N} A(n)/n`, which over-approximates the true infimum; the
//! value is reported as the *window* Schnirelmann density for that reason.

use num_integer::Integer;
use num_rational::Ratio;
use serde::Serialize;

use crate::bits::BitSet;
use crate::sumset::representable_at_most_weak;
use crate::sumset::representable_weak;
use crate::{Error, Result};

pub type Density = Ratio<u64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityReport {
    pub window_n: u64,
    /// `A(1), ..., A(N)`.
    pub counting: Vec<u64>,
    /// `min_{1 <= n <= N} A(n) / n`.
    pub schnirelmann_window: Density,
    /// Smallest `n` attaining the window minimum.
    pub argmin: u64,
    /// `A(N) / N`.
    pub empirical_density: Density,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MannReport {
    pub window_n: u64,
    pub sigma_a: Density,
    pub sigma_b: Density,
    pub sigma_sum: Density,
    /// `A(N)` for `A`, `B` and `A + B`, counting `[1, N]`.
    pub counts: [u64; 3],
    /// `A + B` covers `[1, N]`.
    pub window_complete: bool,
    /// `sigma(A+B) >= min(1, sigma(A) + sigma(B))`; vacuously true when the
    /// window is complete.
    pub inequality_holds: bool,
    pub first_missing: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DensityRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub sigma_num: u64,
    pub sigma_den: u64,
    #[serde(rename = "A_N")]
    pub a_n: u64,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftEquivalence {
    /// Inclusive window `[lo, hi]` of targets `n`.
    pub window: (u64, u64),
    /// Every `n` in the window is a sum of exactly `k` elements of `s`.
    pub whole: bool,
    /// Every `n - k s_0` is a sum of at most `k` elements of `{s_i - s_0}_{i>=1}`.
    pub shifted: bool,
}

impl DensityReport {
    pub fn row(&self, label: impl Into<String>) -> DensityRow {
        DensityRow {
            n: self.window_n,
            sigma_num: *self.schnirelmann_window.numer(),
            sigma_den: *self.schnirelmann_window.denom(),
            a_n: self.counting.last().copied().unwrap_or(0),
            label: label.into(),
        }
    }
}

fn less(a: u64, n: u64, b: u64, m: u64) -> bool {
    (a as u128) * (m as u128) < (b as u128) * (n as u128)
}

/// Counting function and densities of the set bits in `[1, N]`, where
/// `N = set.len() - 1` (bit 0 is ignored).
pub fn density_report(set: &BitSet) -> Result<DensityReport> {
    if set.len() < 2 {
        return Err(Error::InvalidArgument("window must contain [1, N] with N >= 1".into()));
    }
    let window_n = (set.len() - 1) as u64;
    let mut counting = Vec::with_capacity(window_n as usize);
    let mut count = 0u64;
    let (mut best_a, mut best_n) = (u64::MAX, 1u64);
    for n in 1..=window_n {
        if set.contains(n as usize) {
            count += 1;
        }
        counting.push(count);
        if best_a == u64::MAX || less(count, n, best_a, best_n) {
            best_a = count;
            best_n = n;
        }
    }
    Ok(DensityReport {
        window_n,
        counting,
        schnirelmann_window: Ratio::new(best_a, best_n),
        argmin: best_n,
        empirical_density: Ratio::new(count, window_n),
    })
}

/// Window Schnirelmann density of an increasing list of positive integers
/// over `[1, window_n]`.
pub fn window_sigma(sorted: &[u64], window_n: u64) -> Density {
    assert!(window_n >= 1, "window must contain 1");
    // A(n)/n only decreases between elements, so the minimum sits just
    // before an element or at the window end.
    let mut best = (1u64, 1u64);
    let mut count = 0u64;
    for &s in sorted.iter().filter(|&&s| s >= 1 && s <= window_n) {
        if s > 1 && less(count, s - 1, best.0, best.1) {
            best = (count, s - 1);
        }
        count += 1;
    }
    if less(count, window_n, best.0, best.1) {
        best = (count, window_n);
    }
    Ratio::new(best.0, best.1)
}

fn window_sigma_of_bits(set: &BitSet) -> Density {
    let mut best: Option<(u64, u64)> = None;
    let mut count = 0;
    for n in 1..set.len() as u64 {
        if set.contains(n as usize) {
            count += 1;
        }
        if best.is_none_or(|(a, m)| less(count, n, a, m)) {
            best = Some((count, n));
        }
    }
    let (a, m) = best.unwrap_or((1, 1));
    Ratio::new(a, m)
}

/// Checks `sigma(A+B) >= min(1, sigma(A) + sigma(B))` on `[0, N]`.
///
/// Both sets must contain 0. Every sum `n <= N` uses summands `<= n`, so
/// the sumset is exact on the whole window.
pub fn mann_check(a: &BitSet, b: &BitSet) -> Result<MannReport> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(
            "summand windows must share the same N >= 1".into(),
        ));
    }
    if !a.contains(0) || !b.contains(0) {
        return Err(Error::MissingZero);
    }
    let mut sum = BitSet::new(a.len());
    let a_hi = a.max_one().unwrap_or(0);
    for x in b.iter_ones() {
        sum.or_shifted(a, x, a_hi);
    }
    let sigma_a = window_sigma_of_bits(a);
    let sigma_b = window_sigma_of_bits(b);
    let sigma_sum = window_sigma_of_bits(&sum);
    let first_missing = (1..a.len()).find(|&n| !sum.contains(n)).map(|n| n as u64);
    let window_complete = first_missing.is_none();
    let bound = (sigma_a + sigma_b).min(Ratio::new(1, 1));
    let positive = |s: &BitSet| (s.count_ones() - 1) as u64;
    Ok(MannReport {
        window_n: (a.len() - 1) as u64,
        sigma_a,
        sigma_b,
        sigma_sum,
        counts: [positive(a), positive(b), positive(&sum)],
        window_complete,
        inequality_holds: window_complete || sigma_sum >= bound,
        first_missing,
    })
}

impl MannReport {
    /// One density row per set: `A`, `B` and `A+B`.
    pub fn rows(&self, label: &str) -> Vec<DensityRow> {
        [("A", self.sigma_a), ("B", self.sigma_b), ("A+B", self.sigma_sum)]
            .into_iter()
            .zip(self.counts)
            .map(|((which, s), a_n)| DensityRow {
                n: self.window_n,
                sigma_num: *s.numer(),
                sigma_den: *s.denom(),
                a_n,
                label: format!("{label}:{which}"),
            })
            .collect()
    }
}

/// Compares weak `k`-representability of `s` with weak `<= k`
/// representability of `{s_i - s_0}_{i >= 1}` on a window of targets.
///
/// The default window is `[k s_0 + 1, min(N, max(s) + (k-1) s_0)]`: every
/// summand of a target in it is at most `max(s)`, so a finite prefix of an
/// infinite sequence gives exact answers there.
pub fn shift_equivalence_check(
    s: &[u64],
    k: u32,
    horizon: u64,
    window: Option<(u64, u64)>,
) -> Result<ShiftEquivalence> {
    if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sequence must be nonempty, positive and strictly increasing".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let s0 = s[0];
    let whole = s.iter().fold(0u64, |g, &x| g.gcd(&x));
    let diffs: Vec<u64> = s[1..].iter().map(|&x| x - s0).collect();
    let shifted_gcd = diffs.iter().fold(0u64, |g, &x| g.gcd(&x));
    if whole != shifted_gcd {
        return Err(Error::GcdHypothesis {
            whole,
            shifted: shifted_gcd,
        });
    }
    let offset = k as u64 * s0;
    let (lo, hi) = window.unwrap_or_else(|| {
        let top = *s.last().unwrap() + (k as u64 - 1) * s0;
        (offset + 1, horizon.min(top))
    });
    if lo > hi {
        return Ok(ShiftEquivalence {
            window: (lo, hi),
            whole: true,
            shifted: true,
        });
    }
    if lo <= offset || hi > horizon {
        return Err(Error::RangeOutOfBounds { lo, hi, horizon });
    }
    let direct = representable_weak(s, k, hi)?;
    let shifted = representable_at_most_weak(&diffs, k, hi - offset)?;
    Ok(ShiftEquivalence {
        window: (lo, hi),
        whole: (lo..=hi).all(|n| direct.is_representable(n)),
        shifted: (lo..=hi).all(|n| shifted.is_representable(n - offset)),
    })
}
