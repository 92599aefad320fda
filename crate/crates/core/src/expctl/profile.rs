//! Per-trial profiles of exceptional integers and midpoint verdicts.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::gapdist::GapDistribution;
use crate::seed::TrialRng;
use crate::sumset::{exceptional_set, midpoint_representable, representable_exact_distinct, MidpointVerdict};
use crate::weights::generate_weights_seeded;
use crate::{Error, Result};

/// Half-open dyadic windows `[n/2, n), [n/4, n/2), ..., [1, 2)`, top first.
pub fn dyadic_windows(n: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut hi = n;
    while hi > 1 {
        let lo = hi / 2;
        out.push((lo, hi));
        hi = lo;
    }
    out
}

fn window_of(windows: &[(u64, u64)], v: u64) -> Option<usize> {
    windows.iter().position(|&(lo, hi)| lo <= v && v < hi)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProfileTrial {
    pub weights_count: usize,
    pub exceptional_count: usize,
    pub last_exception: Option<u64>,
    /// Counts per window of [`dyadic_windows`] at the horizon, top first.
    pub window_counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExceptionalProfile {
    pub windows: Vec<(u64, u64)>,
    pub trials: Vec<ProfileTrial>,
}

impl ExceptionalProfile {
    /// Empirical CDF of the last exception at `cutoff`; trials without any
    /// exception count as passing.
    pub fn fraction_last_exception_at_most(&self, cutoff: u64) -> f64 {
        let ok = self
            .trials
            .iter()
            .filter(|t| t.last_exception.is_none_or(|l| l <= cutoff))
            .count();
        ok as f64 / self.trials.len() as f64
    }
}

pub(crate) fn check_gcd(dist: &GapDistribution) -> Result<()> {
    match dist.support_gcd() {
        1 => Ok(()),
        g => Err(Error::GcdObstruction(g)),
    }
}

/// One trial: weights to `horizon`, the exact-`k`-distinct table and its
/// exceptional set bucketed dyadically.
pub fn profile_trial(dist: &GapDistribution, k: u32, horizon: u64, seed: u64) -> Result<ProfileTrial> {
    let seq = generate_weights_seeded(dist, horizon, seed);
    let table = representable_exact_distinct(seq.weights(), k, horizon)?;
    let ex = exceptional_set(&table, 1, horizon)?;
    let windows = dyadic_windows(horizon);
    let mut window_counts = vec![0u64; windows.len()];
    for &v in &ex.values {
        if let Some(w) = window_of(&windows, v) {
            window_counts[w] += 1;
        }
    }
    Ok(ProfileTrial {
        weights_count: seq.len(),
        exceptional_count: ex.values.len(),
        last_exception: ex.last_exception,
        window_counts,
    })
}

pub fn exceptional_profile(
    dist: &GapDistribution,
    k: u32,
    horizon: u64,
    trials: usize,
    rng: &mut TrialRng,
) -> Result<ExceptionalProfile> {
    check_gcd(dist)?;
    let seeds: Vec<u64> = (0..trials).map(|_| rng.next_u64()).collect();
    let trials = seeds
        .par_iter()
        .map(|&s| profile_trial(dist, k, horizon, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExceptionalProfile {
        windows: dyadic_windows(horizon),
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MidpointTrial {
    pub weights_count: usize,
    /// Indices `1..=decidable` have `2 W_n <= horizon`.
    pub decidable: usize,
    pub undecided: usize,
    pub false_total: u64,
    /// Top dyadic window of decidable indices, half-open.
    pub top_window: (u64, u64),
    pub false_top: u64,
}

pub(crate) fn check_midpoint_law(dist: &GapDistribution) -> Result<()> {
    if dist.is_degenerate() {
        return Err(Error::Degenerate(format!(
            "{} is a point mass: every midpoint is trivially representable",
            dist.label()
        )));
    }
    if !dist.mean().is_finite() {
        return Err(Error::InvalidArgument(format!("{} has infinite mean", dist.label())));
    }
    Ok(())
}

pub fn midpoint_trial(dist: &GapDistribution, horizon: u64, seed: u64) -> Result<MidpointTrial> {
    let seq = generate_weights_seeded(dist, horizon, seed);
    let ws = seq.weights();
    let decidable = ws.partition_point(|&w| 2 * w <= horizon);
    let top_window = dyadic_windows(decidable as u64 + 1).first().copied().unwrap_or((1, 1));
    let (mut false_total, mut false_top) = (0, 0);
    for n in 1..=decidable {
        if midpoint_representable(ws, n, horizon)? == MidpointVerdict::NotRepresentable {
            false_total += 1;
            if top_window.0 <= n as u64 && (n as u64) < top_window.1 {
                false_top += 1;
            }
        }
    }
    Ok(MidpointTrial {
        weights_count: ws.len(),
        decidable,
        undecided: ws.len() - decidable,
        false_total,
        top_window,
        false_top,
    })
}

pub fn midpoint_profile(
    dist: &GapDistribution,
    horizon: u64,
    trials: usize,
    rng: &mut TrialRng,
) -> Result<Vec<MidpointTrial>> {
    check_midpoint_law(dist)?;
    let seeds: Vec<u64> = (0..trials).map(|_| rng.next_u64()).collect();
    seeds
        .par_iter()
        .map(|&s| midpoint_trial(dist, horizon, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::sumset::brute_force_oracle;
    use crate::sumset::RepMode;

    #[test]
    fn windows_partition_below_n() {
        let w = dyadic_windows(1_000_000);
        assert_eq!(w[0], (500_000, 1_000_000));
        assert_eq!(w.last().unwrap().0, 1);
        assert!(w.windows(2).all(|p| p[0].0 == p[1].1));
        assert!(dyadic_windows(1).is_empty());
        assert_eq!(dyadic_windows(5), vec![(2, 5), (1, 2)]);
    }

    #[test]
    fn gcd_obstruction_is_refused() {
        let d = GapDistribution::finite_pmf(&[(2, 0.5), (4, 0.5)]).unwrap();
        let err = exceptional_profile(&d, 2, 100, 3, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::GcdObstruction(2)));
        assert!(err.to_string().contains("multiple of 2"));
    }

    #[test]
    fn profile_counts_match_oracle() {
        let d = GapDistribution::geometric(0.3).unwrap();
        let seed = 17;
        let t = profile_trial(&d, 2, 300, seed).unwrap();
        let ws = generate_weights_seeded(&d, 300, seed);
        let misses: Vec<u64> = (1..=300)
            .filter(|&n| !brute_force_oracle(ws.weights(), 2, n, RepMode::ExactDistinct))
            .collect();
        assert_eq!(t.exceptional_count, misses.len());
        assert_eq!(t.last_exception, misses.last().copied());
        let in_windows = misses.iter().filter(|&&v| v < 300).count() as u64;
        assert_eq!(t.window_counts.iter().sum::<u64>(), in_windows);
    }

    #[test]
    fn midpoint_bookkeeping() {
        let d = GapDistribution::geometric(0.5).unwrap();
        let point = GapDistribution::point_mass(2).unwrap();
        assert!(matches!(midpoint_profile(&point, 100, 1, &mut rng_from_seed(0)), Err(Error::Degenerate(_))));
        let trials = midpoint_profile(&d, 10_000, 5, &mut rng_from_seed(1)).unwrap();
        for t in &trials {
            assert_eq!(t.decidable + t.undecided, t.weights_count);
            assert!(t.false_top <= t.false_total);
        }
    }

    #[test]
    fn midpoint_false_verdicts_match_pair_scan() {
        let d = GapDistribution::geometric(0.3).unwrap();
        let seq = generate_weights_seeded(&d, 2_000, 5);
        let ws = seq.weights();
        let t = midpoint_trial(&d, 2_000, 5).unwrap();
        let naive = (1..=t.decidable)
            .filter(|&n| {
                let target = 2 * ws[n - 1];
                !(0..ws.len()).any(|i| ws[i] < target && ws[i + 1..].contains(&(target - ws[i])))
            })
            .count() as u64;
        assert_eq!(t.false_total, naive);
    }
}
