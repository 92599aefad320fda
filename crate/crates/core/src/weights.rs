//! Weight sequences `W_i = X_1 + ... + X_i` and the reflection diagnostics
//! that certify `n` as a sum of two distinct weights.
//!
//! Indices exposed by this module are 1-based (`W_1` is the first weight);
//! `W_0 = 0` by convention.

use std::io::{BufRead, Write};

use crate::gapdist::GapDistribution;
use crate::seed::{rng_from_seed, TrialRng};
use crate::{Error, Result};

const HEADER_TAG: &str = "gaps v1";

/// A realized sequence truncated at `horizon`: every weight `<= horizon` is
/// present and the next one (if it was drawn) exceeds the horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSequence {
    gaps: Vec<u64>,
    weights: Vec<u64>,
    horizon: u64,
    seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReflectionDiagnostics {
    pub n: u64,
    /// Index of the last weight `<= n`.
    pub t: usize,
    /// `R_1..R_T`.
    pub reflected: Vec<u64>,
    /// Distinct 1-based indices `(i, j)` with `W_i + W_j = n`, taken from the
    /// intersection `{W_i} ∩ {R_j} ∩ [1, n/3]`.
    pub witness: Option<(usize, usize)>,
}

impl WeightSequence {
    pub fn from_gaps(gaps: Vec<u64>, horizon: u64) -> Result<Self> {
        let mut weights = Vec::with_capacity(gaps.len());
        let mut total = 0u64;
        for &g in &gaps {
            if g == 0 {
                return Err(Error::InvalidArgument("gaps must be positive".into()));
            }
            total = total
                .checked_add(g)
                .filter(|&t| t <= horizon)
                .ok_or(Error::BeyondHorizon {
                    n: total.saturating_add(g),
                    horizon,
                })?;
            weights.push(total);
        }
        Ok(Self {
            gaps,
            weights,
            horizon,
            seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `W_i` with `W_0 = 0`.
    pub fn weight(&self, i: usize) -> u64 {
        if i == 0 {
            0
        } else {
            self.weights[i - 1]
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER_TAG} seed={} horizon={}", self.seed, self.horizon)?;
        for g in &self.gaps {
            writeln!(out, "{g}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty gap file".into()))??;
        let rest = header
            .strip_prefix(HEADER_TAG)
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut seed = None;
        let mut horizon = None;
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("horizon", v)) => horizon = v.parse::<u64>().ok(),
                _ => return Err(Error::Parse(format!("bad header field {field:?}"))),
            }
        }
        let (seed, horizon) = seed
            .zip(horizon)
            .ok_or_else(|| Error::Parse(format!("header needs seed and horizon: {header:?}")))?;
        let mut gaps = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            gaps.push(
                line.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("gap {line:?}: {e}")))?,
            );
        }
        Ok(Self::from_gaps(gaps, horizon)?.with_seed(seed))
    }
}

/// Draws gaps until the running sum would pass `horizon`.
pub fn generate_weights(dist: &GapDistribution, horizon: u64, rng: &mut TrialRng) -> WeightSequence {
    assert!(horizon >= 1, "horizon must be positive");
    let mut gaps = Vec::new();
    let mut weights = Vec::new();
    let mut total = 0u64;
    loop {
        let g = dist.sample(rng);
        match total.checked_add(g) {
            Some(next) if next <= horizon => {
                total = next;
                gaps.push(g);
                weights.push(total);
            }
            _ => break,
        }
    }
    WeightSequence {
        gaps,
        weights,
        horizon,
        seed: 0,
    }
}

pub fn generate_weights_seeded(dist: &GapDistribution, horizon: u64, seed: u64) -> WeightSequence {
    generate_weights(dist, horizon, &mut rng_from_seed(seed)).with_seed(seed)
}

/// `T_n`: the largest `i` with `W_i <= n`, or 0.
pub fn last_index_before(seq: &WeightSequence, n: u64) -> Result<usize> {
    if n > seq.horizon {
        return Err(Error::BeyondHorizon {
            n,
            horizon: seq.horizon,
        });
    }
    Ok(seq.weights.partition_point(|&w| w <= n))
}

pub fn reflected_sequence(seq: &WeightSequence, n: u64) -> Result<ReflectionDiagnostics> {
    let t = last_index_before(seq, n)?;
    if t == 0 {
        return Err(Error::NoWeightBelow(n));
    }
    // R_i = n - W_T + X_T + X_{T-1} + ... + X_{T-i+1}
    let base = n - seq.weight(t);
    let reflected: Vec<u64> = seq.gaps[..t]
        .iter()
        .rev()
        .scan(base, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();

    // Smallest value in {W_i}_{i<=T} ∩ {R_j} with 3w <= n. Both lists ascend.
    let mut witness = None;
    let (mut a, mut b) = (0usize, 0usize);
    while a < t && b < t {
        let w = seq.weights[a];
        if 3 * w > n {
            break;
        }
        let r = reflected[b];
        match w.cmp(&r) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                // R_j = n - W_{T-j}, so W_i + W_{T-j} = n.
                witness = Some((a + 1, t - (b + 1)));
                break;
            }
        }
    }
    Ok(ReflectionDiagnostics {
        n,
        t,
        reflected,
        witness,
    })
}

/// The event `max(X_1, ..., X_n) <= n / m`.
pub fn max_gap_event(seq: &WeightSequence, n: usize, m: f64) -> Result<bool> {
    if seq.gaps.len() < n {
        return Err(Error::NotEnoughGaps {
            needed: n,
            available: seq.gaps.len(),
        });
    }
    let limit = n as f64;
    Ok(seq.gaps[..n].iter().all(|&x| x as f64 * m <= limit))
}

/// `W'_{b,i} = W_{T_{n-b}} - W_{T_{n-b} - i}` for `i = 1..=T_{n-b}`: the
/// partial sums of gaps read backward from gap `T_{n-b}`.
pub fn backward_weights(seq: &WeightSequence, n: u64, b: u64) -> Result<Vec<u64>> {
    if b >= n {
        return Err(Error::InvalidArgument(format!(
            "delay b = {b} must be below n = {n}"
        )));
    }
    let t = last_index_before(seq, n - b)?;
    if t == 0 {
        return Err(Error::NoWeightBelow(n - b));
    }
    Ok(seq.gaps[..t]
        .iter()
        .rev()
        .scan(0u64, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect())
}
