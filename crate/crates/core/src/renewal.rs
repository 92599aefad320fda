//! Delayed renewal coupling.
//!
//! Two independent renewal processes share a gap law: `W_i` driven by gaps
//! `X_i` and `U_j` driven by an independent copy `Y_j`, the second one
//! started at offset `b`. Two meeting notions are tracked separately:
//!
//! * the same-index meeting `K_{0,b} = min{i : W_i = b + U_i}`, found by
//!   running the difference walk `D_i = W_i - U_i` until it hits `b`;
//! * the first common range value `min({W_i} ∩ {b + U_j})`, found by merging
//!   the two ranges in increasing order.
//!
//! Each process draws from its own seeded stream. The range merge replays
//! those streams from the stored seeds, so neither quantity needs the walk
//! history in memory.

use rayon::prelude::*;

use crate::gapdist::GapDistribution;
use crate::seed::{rng_from_seed, TrialRng};
use crate::{Error, Result};
use rand::RngCore;

/// Default ceiling on the censored fraction of a valid estimate.
pub const DEFAULT_CENSOR_THRESHOLD: f64 = 1e-3;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeetingSample {
    pub delay: u64,
    /// `K_{0,b}`, or `None` when censored at `cap`.
    pub meeting_index: Option<u64>,
    /// `W_K = b + U_K` when uncensored.
    pub meeting_value: Option<u128>,
    /// Least `v` in `{W_i} ∩ {b + U_j}`, `None` if either range needed more
    /// than `cap` steps.
    pub first_common_range_value: Option<u128>,
    pub cap: u64,
    pub x_seed: u64,
    pub y_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeetingEstimate {
    pub b: u64,
    pub trials: usize,
    /// Mean of `min(K_{0,b}, cap)`: a lower bound once anything is censored.
    pub mean_index: f64,
    pub half_width_95: f64,
    pub censored_fraction: f64,
    pub cap: u64,
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max_{b >= 1} mean(b) / b`, the empirical constant in `E K <= C b`.
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlackwellTail {
    /// `tail[n - 1]` estimates `P(I >= n)` for `n = 1..=n_window`.
    pub tail: Vec<f64>,
    /// Running sums of `tail`.
    pub partial_sums: Vec<f64>,
    pub trials: usize,
    pub censored: usize,
}

impl BlackwellTail {
    /// Relative change of the partial sum over the last decade of `n`:
    /// `(S(N) - S(N/10)) / S(N)`.
    pub fn last_decade_change(&self) -> f64 {
        let n = self.partial_sums.len();
        let total = self.partial_sums[n - 1];
        let earlier = self.partial_sums[(n / 10).max(1) - 1];
        (total - earlier) / total
    }
}

fn check_non_degenerate(dist: &GapDistribution) -> Result<()> {
    if dist.is_degenerate() {
        return Err(Error::Degenerate(format!(
            "{} has a single support point, so the difference walk W_i - U_i \
             is identically 0 and never reaches b >= 1",
            dist.label()
        )));
    }
    Ok(())
}

/// Same-index meeting time from explicit stream seeds.
fn meeting_index(dist: &GapDistribution, b: u64, cap: u64, x_seed: u64, y_seed: u64) -> Option<(u64, u128)> {
    let mut xs = rng_from_seed(x_seed);
    let mut ys = rng_from_seed(y_seed);
    let target = b as i128;
    let mut diff: i128 = 0;
    let mut w: u128 = 0;
    for i in 1..=cap {
        let x = dist.sample(&mut xs);
        let y = dist.sample(&mut ys);
        w += x as u128;
        diff += x as i128 - y as i128;
        if diff == target {
            return Some((i, w));
        }
    }
    None
}

/// Smallest common value of `{a_off + A_i}_{i>=1}` and `{b_off + B_j}_{j>=1}`
/// where `A`, `B` are weight sequences replayed from the given seeds. Returns
/// the value and both 1-based indices, or `None` once either side would
/// need more than `cap` steps.
fn first_common(
    dist: &GapDistribution,
    a_seed: u64,
    b_seed: u64,
    b_off: u64,
    cap: u64,
) -> Option<(u128, u64, u64)> {
    let mut ra = rng_from_seed(a_seed);
    let mut rb = rng_from_seed(b_seed);
    let mut a = dist.sample(&mut ra) as u128;
    let mut bv = b_off as u128 + dist.sample(&mut rb) as u128;
    let (mut ia, mut ib) = (1u64, 1u64);
    loop {
        match a.cmp(&bv) {
            std::cmp::Ordering::Equal => return Some((a, ia, ib)),
            std::cmp::Ordering::Less => {
                if ia == cap {
                    return None;
                }
                a += dist.sample(&mut ra) as u128;
                ia += 1;
            }
            std::cmp::Ordering::Greater => {
                if ib == cap {
                    return None;
                }
                bv += dist.sample(&mut rb) as u128;
                ib += 1;
            }
        }
    }
}

/// One coupling run. Advances `rng` by two words (the stream seeds).
pub fn meeting_sample(dist: &GapDistribution, b: u64, cap: u64, rng: &mut TrialRng) -> Result<MeetingSample> {
    check_non_degenerate(dist)?;
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be at least 1".into()));
    }
    let x_seed = rng.next_u64();
    let y_seed = rng.next_u64();
    Ok(meeting_sample_from_seeds(dist, b, cap, x_seed, y_seed))
}

pub fn meeting_sample_from_seeds(dist: &GapDistribution, b: u64, cap: u64, x_seed: u64, y_seed: u64) -> MeetingSample {
    let meeting = meeting_index(dist, b, cap, x_seed, y_seed);
    let range = first_common(dist, x_seed, y_seed, b, cap);
    MeetingSample {
        delay: b,
        meeting_index: meeting.map(|m| m.0),
        meeting_value: meeting.map(|m| m.1),
        first_common_range_value: range.map(|r| r.0),
        cap,
        x_seed,
        y_seed,
    }
}

/// Replays the stored streams and checks `W_K = b + U_K` at the recorded `K`
/// with no earlier same-index meeting.
pub fn verify_meeting(dist: &GapDistribution, sample: &MeetingSample) -> bool {
    let Some(k) = sample.meeting_index else {
        return meeting_index(dist, sample.delay, sample.cap, sample.x_seed, sample.y_seed).is_none();
    };
    let mut xs = rng_from_seed(sample.x_seed);
    let mut ys = rng_from_seed(sample.y_seed);
    let (mut w, mut u) = (0u128, 0u128);
    for i in 1..=k {
        w += dist.sample(&mut xs) as u128;
        u += dist.sample(&mut ys) as u128;
        let met = w == sample.delay as u128 + u;
        if met != (i == k) {
            return false;
        }
    }
    Some(w) == sample.meeting_value
}

pub fn estimate_meeting_mean(
    dist: &GapDistribution,
    b: u64,
    trials: usize,
    cap: u64,
    rng: &mut TrialRng,
) -> Result<MeetingEstimate> {
    estimate_meeting_mean_with(dist, b, trials, cap, rng, DEFAULT_CENSOR_THRESHOLD)
}

/// Monte Carlo estimate of `E min(K_{0,b}, cap)`.
///
/// Stream seeds for every trial are drawn from `rng` up front, then trials run
/// in parallel. Aggregation uses integer sums only, so the result does not
/// depend on the thread schedule.
pub fn estimate_meeting_mean_with(
    dist: &GapDistribution,
    b: u64,
    trials: usize,
    cap: u64,
    rng: &mut TrialRng,
    censor_threshold: f64,
) -> Result<MeetingEstimate> {
    aggregate(dist, b, trials, cap, rng, censor_threshold, |xs, ys| {
        meeting_index(dist, b, cap, xs, ys).map(|m| m.0)
    })
}

/// Same aggregation for the first range intersection: the statistic is the
/// index `i` along `W` with `W_i = min({W_i} ∩ {b + U_j})`.
pub fn estimate_range_meeting_mean(
    dist: &GapDistribution,
    b: u64,
    trials: usize,
    cap: u64,
    rng: &mut TrialRng,
) -> Result<MeetingEstimate> {
    aggregate(dist, b, trials, cap, rng, DEFAULT_CENSOR_THRESHOLD, |xs, ys| {
        first_common(dist, xs, ys, b, cap).map(|r| r.1)
    })
}

fn aggregate<F>(
    dist: &GapDistribution,
    b: u64,
    trials: usize,
    cap: u64,
    rng: &mut TrialRng,
    censor_threshold: f64,
    stat: F,
) -> Result<MeetingEstimate>
where
    F: Fn(u64, u64) -> Option<u64> + Sync,
{
    check_non_degenerate(dist)?;
    if trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be at least 1".into()));
    }
    let seeds: Vec<(u64, u64)> = (0..trials).map(|_| (rng.next_u64(), rng.next_u64())).collect();
    let (sum, sum_sq, censored) = seeds
        .par_iter()
        .map(|&(xs, ys)| match stat(xs, ys) {
            Some(k) => (k as u128, (k as u128) * (k as u128), 0usize),
            None => (cap as u128, (cap as u128) * (cap as u128), 1),
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if censored == trials {
        return Err(Error::AllCensored(trials));
    }
    let n = trials as f64;
    let mean = sum as f64 / n;
    let var = ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0);
    let censored_fraction = censored as f64 / n;
    Ok(MeetingEstimate {
        b,
        trials,
        mean_index: mean,
        half_width_95: Z_95 * (var / n).sqrt(),
        censored_fraction,
        cap,
        valid: censored_fraction < censor_threshold,
    })
}

/// Least-squares line through `(b, mean)` for `b >= 1`, with the largest
/// observed `mean / b`.
pub fn linear_bound_fit(points: &[(u64, f64)]) -> Result<LinearFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 >= 1)
        .map(|&(b, m)| (b as f64, m))
        .collect();
    let mut distinct: Vec<u64> = points.iter().map(|p| p.0).filter(|&b| b >= 1).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 points with distinct b >= 1".into(),
        ));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let max_ratio = usable
        .iter()
        .map(|p| p.1 / p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        max_ratio,
    })
}

/// Tail of the index `I` at which two independent fresh walks first share a
/// value: `I` is counted along the first walk. Censored runs count as
/// `I >= n` for every `n` in the window.
pub fn blackwell_tail(
    dist: &GapDistribution,
    n_window: usize,
    trials: usize,
    cap: u64,
    rng: &mut TrialRng,
) -> Result<BlackwellTail> {
    check_non_degenerate(dist)?;
    if !dist.mean().is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{} has infinite mean",
            dist.label()
        )));
    }
    if n_window == 0 || trials == 0 {
        return Err(Error::InvalidArgument("window and trials must be positive".into()));
    }
    let seeds: Vec<(u64, u64)> = (0..trials).map(|_| (rng.next_u64(), rng.next_u64())).collect();
    let indices: Vec<Option<u64>> = seeds
        .par_iter()
        .map(|&(a, b)| first_common(dist, a, b, 0, cap).map(|r| r.1))
        .collect();
    // hist[i] = #{min(I, n_window + 1) = i}; censored runs land in the last bin
    let mut hist = vec![0usize; n_window + 2];
    let mut censored = 0;
    for idx in &indices {
        match idx {
            Some(i) => hist[(*i as usize).min(n_window + 1)] += 1,
            None => {
                censored += 1;
                hist[n_window + 1] += 1;
            }
        }
    }
    let mut tail = vec![0.0; n_window];
    let mut at_least = hist[n_window + 1];
    for n in (1..=n_window).rev() {
        at_least += hist[n];
        tail[n - 1] = at_least as f64 / trials as f64;
    }
    let partial_sums = tail
        .iter()
        .scan(0.0, |s, &p| {
            *s += p;
            Some(*s)
        })
        .collect();
    Ok(BlackwellTail {
        tail,
        partial_sums,
        trials,
        censored,
    })
}
