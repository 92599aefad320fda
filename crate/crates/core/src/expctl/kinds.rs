//! Trial bodies and pass/fail assessment for each experiment kind.

use num_rational::Ratio;
use rand::Rng;
use serde_json::{json, Value};

use super::profile::{dyadic_windows, midpoint_trial, profile_trial, MidpointTrial, ProfileTrial};
use super::{Assertion, ExperimentConfig, ExperimentKind};
use crate::bits::BitSet;
use crate::density::{mann_check, window_sigma, Density, MannReport};
use crate::gapdist::GapDistribution;
use crate::renewal::{
    blackwell_tail, estimate_meeting_mean_with, estimate_range_meeting_mean, linear_bound_fit, MeetingEstimate,
};
use crate::seed::{derive_seed, rng_from_seed};
use crate::weights::generate_weights_seeded;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DensityTrial {
    pub weights_count: usize,
    /// `A(N) / N` for the generated weights.
    pub empirical_density: f64,
    pub relative_error: f64,
    /// Window-certified threshold: least `n` with `A(m)/m > 1/k` for all
    /// `m` in `[n, N]`.
    pub n0: Option<u64>,
    /// 1 when 1 is in the support (unit-gap prefix), 2 otherwise.
    pub case: u8,
    pub sigma_construction: Option<Density>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MannTrial {
    pub q_a: f64,
    pub q_b: f64,
    pub report: MannReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenewalRow {
    pub batch: u64,
    pub b: u64,
    pub same_index: MeetingEstimate,
    pub range: MeetingEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrialOutcome {
    Profile(ProfileTrial),
    Density(DensityTrial),
    Mann(MannTrial),
    Renewal(RenewalRow),
    Midpoint(MidpointTrial),
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn ratio(r: &Density) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

impl TrialOutcome {
    /// Kind-specific CSV columns, in a fixed order.
    pub fn fields(&self, horizon: u64) -> Vec<(String, String)> {
        let f = |k: &str, v: String| (k.to_string(), v);
        match self {
            TrialOutcome::Profile(t) => {
                let mut out = vec![
                    f("weights_count", t.weights_count.to_string()),
                    f("exceptional_count", t.exceptional_count.to_string()),
                    f("last_exception", opt(t.last_exception)),
                ];
                for ((lo, hi), c) in dyadic_windows(horizon).iter().zip(&t.window_counts) {
                    out.push((format!("win_{lo}_{hi}"), c.to_string()));
                }
                out
            }
            TrialOutcome::Density(t) => vec![
                f("weights_count", t.weights_count.to_string()),
                f("empirical_density", t.empirical_density.to_string()),
                f("relative_error", t.relative_error.to_string()),
                f("n0", opt(t.n0)),
                f("case", t.case.to_string()),
                f("sigma_construction", opt(t.sigma_construction.as_ref().map(ratio))),
            ],
            TrialOutcome::Mann(t) => vec![
                f("q_a", t.q_a.to_string()),
                f("q_b", t.q_b.to_string()),
                f("sigma_a", ratio(&t.report.sigma_a)),
                f("sigma_b", ratio(&t.report.sigma_b)),
                f("sigma_sum", ratio(&t.report.sigma_sum)),
                f("window_complete", t.report.window_complete.to_string()),
                f("first_missing", opt(t.report.first_missing)),
                f("inequality_holds", t.report.inequality_holds.to_string()),
            ],
            TrialOutcome::Renewal(r) => vec![
                f("batch", r.batch.to_string()),
                f("b", r.b.to_string()),
                f("trials", r.same_index.trials.to_string()),
                f("cap", r.same_index.cap.to_string()),
                f("mean_index", r.same_index.mean_index.to_string()),
                f("half_width_95", r.same_index.half_width_95.to_string()),
                f("censored_fraction", r.same_index.censored_fraction.to_string()),
                f("range_mean_index", r.range.mean_index.to_string()),
                f("range_half_width_95", r.range.half_width_95.to_string()),
                f("range_censored_fraction", r.range.censored_fraction.to_string()),
            ],
            TrialOutcome::Midpoint(t) => vec![
                f("weights_count", t.weights_count.to_string()),
                f("decidable", t.decidable.to_string()),
                f("undecided", t.undecided.to_string()),
                f("false_total", t.false_total.to_string()),
                f("top_lo", t.top_window.0.to_string()),
                f("top_hi", t.top_window.1.to_string()),
                f("false_top", t.false_top.to_string()),
            ],
        }
    }
}

/// Runs trial `index` of `config` in isolation.
pub(crate) fn run_trial(config: &ExperimentConfig, dist: &GapDistribution, index: u64) -> Result<TrialOutcome> {
    let seed = derive_seed(config.master_seed, index);
    let n = config.horizon;
    Ok(match config.kind {
        ExperimentKind::CompletenessProfile | ExperimentKind::HeavyTailNegative => {
            TrialOutcome::Profile(profile_trial(dist, config.k, n, seed)?)
        }
        ExperimentKind::DensityConvergence => TrialOutcome::Density(density_trial(dist, config.k, n, seed)?),
        ExperimentKind::MannSuite => TrialOutcome::Mann(mann_trial(n, seed)?),
        ExperimentKind::RenewalSweep => TrialOutcome::Renewal(renewal_row(config, dist, index, seed)?),
        ExperimentKind::MidpointCheck => TrialOutcome::Midpoint(midpoint_trial(dist, n, seed)?),
    })
}

fn density_trial(dist: &GapDistribution, k: u32, horizon: u64, seed: u64) -> Result<DensityTrial> {
    let seq = generate_weights_seeded(dist, horizon, seed);
    let ws = seq.weights();
    let target = 1.0 / dist.mean().finite().unwrap_or(f64::INFINITY);
    let empirical = ws.len() as f64 / horizon as f64;
    let relative_error = (empirical - target).abs() / target;

    // largest m <= N with k A(m) <= m; n0 is one past it
    let mut n0 = 1;
    let mut count = 0u64;
    let mut next = 0;
    for m in 1..=horizon {
        while next < ws.len() && ws[next] <= m {
            next += 1;
            count += 1;
        }
        if u64::from(k) * count <= m {
            n0 = m + 1;
        }
    }
    let n0 = (n0 <= horizon).then_some(n0);

    let case = if dist.support_up_to(1).is_empty() { 2 } else { 1 };
    let sigma = match (n0, case) {
        (None, _) => None,
        (Some(n0), 1) => {
            let constructed: Vec<u64> = (1..=n0)
                .chain(ws.iter().map(|&w| n0 + w).take_while(|&v| v <= horizon))
                .collect();
            Some(window_sigma(&constructed, horizon))
        }
        (Some(n0), _) => {
            let report = dist.support_analysis(horizon.min(10_000))?;
            report.x_prime.map(|_| {
                let x0 = report.x0;
                let base = 1 + (n0 + 1) * x0;
                let constructed: Vec<u64> = (0..=n0 + 1)
                    .map(|t| 1 + t * x0)
                    .chain(ws.iter().map(|&w| base + w))
                    .take_while(|&v| v <= horizon)
                    .collect();
                window_sigma(&constructed, horizon)
            })
        }
    };
    Ok(DensityTrial {
        weights_count: ws.len(),
        empirical_density: empirical,
        relative_error,
        n0,
        case,
        sigma_construction: sigma,
    })
}

fn random_subset(rng: &mut impl Rng, bound: u64, q: f64) -> BitSet {
    let mut set = BitSet::new(bound as usize + 1);
    set.insert(0);
    for n in 1..=bound as usize {
        if rng.random_bool(q) {
            set.insert(n);
        }
    }
    set
}

fn mann_trial(bound: u64, seed: u64) -> Result<MannTrial> {
    let mut rng = rng_from_seed(seed);
    let q_a: f64 = rng.random();
    let q_b: f64 = rng.random();
    let a = random_subset(&mut rng, bound, q_a);
    let b = random_subset(&mut rng, bound, q_b);
    Ok(MannTrial {
        q_a,
        q_b,
        report: mann_check(&a, &b)?,
    })
}

/// `{0} ∪ {n >= 1 : n ≡ 0, 1 mod 4}` on `[0, 40]` against itself.
pub fn residue_example() -> Result<MannReport> {
    let set = BitSet::from_indices(41, (0..=40).filter(|n| n % 4 <= 1));
    mann_check(&set, &set)
}

fn renewal_row(config: &ExperimentConfig, dist: &GapDistribution, index: u64, seed: u64) -> Result<RenewalRow> {
    let w = &config.window;
    let batch = index / w.b_max;
    let b = index % w.b_max + 1;
    let mut rng = rng_from_seed(seed);
    let censored = |e: Error| match e {
        Error::AllCensored(trials) => Ok(MeetingEstimate {
            b,
            trials,
            mean_index: w.cap as f64,
            half_width_95: 0.0,
            censored_fraction: 1.0,
            cap: w.cap,
            valid: false,
        }),
        e => Err(e),
    };
    let same_index =
        estimate_meeting_mean_with(dist, b, config.trials, w.cap, &mut rng, config.thresholds.censor_threshold)
            .or_else(censored)?;
    let range = estimate_range_meeting_mean(dist, b, config.trials, w.cap, &mut rng).or_else(censored)?;
    Ok(RenewalRow {
        batch,
        b,
        same_index,
        range,
    })
}

fn fraction(ok: usize, total: usize) -> f64 {
    ok as f64 / total as f64
}

/// Kind-specific assertions plus a JSON summary for the manifest.
pub(crate) fn assess(
    config: &ExperimentConfig,
    dist: &GapDistribution,
    outcomes: &[TrialOutcome],
) -> Result<(Vec<Assertion>, Value)> {
    let th = &config.thresholds;
    let mut assertions = Vec::new();
    let summary = match config.kind {
        ExperimentKind::CompletenessProfile | ExperimentKind::HeavyTailNegative => {
            let trials: Vec<&ProfileTrial> = outcomes
                .iter()
                .filter_map(|o| match o {
                    TrialOutcome::Profile(t) => Some(t),
                    _ => None,
                })
                .collect();
            let late = trials
                .iter()
                .filter(|t| t.last_exception.is_none_or(|l| l <= th.last_exception_cutoff))
                .count();
            let top_hit = trials.iter().filter(|t| t.window_counts.first().is_some_and(|&c| c > 0)).count();
            let top_empty = trials.len() - top_hit;
            let mut lasts: Vec<u64> = trials.iter().map(|t| t.last_exception.unwrap_or(0)).collect();
            lasts.sort_unstable();
            if config.kind == ExperimentKind::CompletenessProfile {
                let f = fraction(late, trials.len());
                assertions.push(Assertion::new(
                    "last_exception_cutoff",
                    f >= th.min_pass_fraction,
                    format!(
                        "{late}/{} trials have lastException <= {} (need fraction >= {})",
                        trials.len(),
                        th.last_exception_cutoff,
                        th.min_pass_fraction
                    ),
                ));
            } else {
                let f = fraction(top_hit, trials.len());
                assertions.push(Assertion::new(
                    "top_window_nonempty",
                    f >= th.min_pass_fraction,
                    format!(
                        "{top_hit}/{} trials have an exception in the top window (need fraction >= {})",
                        trials.len(),
                        th.min_pass_fraction
                    ),
                ));
            }
            json!({
                "trials": trials.len(),
                "last_exception_at_most_cutoff": late,
                "top_window_empty": top_empty,
                "top_window_nonempty": top_hit,
                "last_exception_min": lasts.first(),
                "last_exception_median": lasts.get(lasts.len() / 2),
                "last_exception_max": lasts.last(),
            })
        }
        ExperimentKind::DensityConvergence => {
            let trials: Vec<&DensityTrial> = outcomes
                .iter()
                .filter_map(|o| match o {
                    TrialOutcome::Density(t) => Some(t),
                    _ => None,
                })
                .collect();
            let close = trials.iter().filter(|t| t.relative_error <= th.density_tolerance).count();
            let one_over_k = Ratio::new(1, u64::from(config.k));
            let sigma_ok = trials
                .iter()
                .filter(|t| match (t.case, t.sigma_construction) {
                    (1, Some(s)) => s > one_over_k,
                    (_, Some(s)) => s >= one_over_k,
                    _ => false,
                })
                .count();
            let worst = trials.iter().map(|t| t.relative_error).fold(0.0, f64::max);
            assertions.push(Assertion::new(
                "density_within_tolerance",
                close == trials.len(),
                format!(
                    "{close}/{} trials within relative {} of 1/E X (worst {worst})",
                    trials.len(),
                    th.density_tolerance
                ),
            ));
            assertions.push(Assertion::new(
                "construction_sigma",
                sigma_ok == trials.len(),
                format!("{sigma_ok}/{} constructions have window sigma above 1/{}", trials.len(), config.k),
            ));
            let min_sigma = trials.iter().filter_map(|t| t.sigma_construction).min();
            json!({
                "trials": trials.len(),
                "target_density": 1.0 / dist.mean().finite().unwrap_or(f64::INFINITY),
                "worst_relative_error": worst,
                "min_sigma_construction": min_sigma.map(|s| ratio(&s)),
            })
        }
        ExperimentKind::MannSuite => {
            let reports: Vec<&MannReport> = outcomes
                .iter()
                .filter_map(|o| match o {
                    TrialOutcome::Mann(t) => Some(&t.report),
                    _ => None,
                })
                .collect();
            let incomplete = reports.iter().filter(|r| !r.window_complete).count();
            let violations = reports.iter().filter(|r| !r.window_complete && !r.inequality_holds).count();
            assertions.push(Assertion::new(
                "no_violations",
                violations == 0,
                format!("{violations} violations in {incomplete} non-complete pairs"),
            ));
            let ex = residue_example()?;
            let third = Ratio::new(1, 3);
            let ok = ex.sigma_a == third && ex.sigma_b == third && ex.sigma_sum == Ratio::new(2, 3);
            assertions.push(Assertion::new(
                "residue_example",
                ok,
                format!(
                    "sigma(A) = {}, sigma(B) = {}, sigma(A+B) = {}",
                    ratio(&ex.sigma_a),
                    ratio(&ex.sigma_b),
                    ratio(&ex.sigma_sum)
                ),
            ));
            json!({
                "pairs": reports.len(),
                "non_complete": incomplete,
                "violations": violations,
            })
        }
        ExperimentKind::RenewalSweep => {
            let rows: Vec<&RenewalRow> = outcomes
                .iter()
                .filter_map(|o| match o {
                    TrialOutcome::Renewal(r) => Some(r),
                    _ => None,
                })
                .collect();
            let bad: Vec<(u64, u64, f64)> = rows
                .iter()
                .filter(|r| r.same_index.censored_fraction >= th.censor_threshold)
                .map(|r| (r.batch, r.b, r.same_index.censored_fraction))
                .collect();
            let worst = rows.iter().map(|r| r.same_index.censored_fraction).fold(0.0, f64::max);
            assertions.push(Assertion::new(
                "censoring",
                bad.is_empty(),
                format!(
                    "{} of {} rows have censored fraction >= {} (worst {worst})",
                    bad.len(),
                    rows.len(),
                    th.censor_threshold
                ),
            ));
            let mut ratios = Vec::new();
            let mut range_ratios = Vec::new();
            for batch in 0..config.window.batches {
                let pick = |range: bool| -> Vec<(u64, f64)> {
                    rows.iter()
                        .filter(|r| r.batch == batch)
                        .map(|r| (r.b, if range { r.range.mean_index } else { r.same_index.mean_index }))
                        .collect()
                };
                ratios.push(linear_bound_fit(&pick(false))?);
                range_ratios.push(linear_bound_fit(&pick(true))?);
            }
            let spread = |fits: &[crate::renewal::LinearFit]| {
                let hi = fits.iter().map(|f| f.max_ratio).fold(f64::NEG_INFINITY, f64::max);
                let lo = fits.iter().map(|f| f.max_ratio).fold(f64::INFINITY, f64::min);
                (hi - lo) / lo
            };
            let rel = spread(&ratios);
            assertions.push(Assertion::new(
                "max_ratio_agreement",
                rel <= th.ratio_agreement,
                format!(
                    "maxRatio per batch {:?}: relative spread {rel} (limit {})",
                    ratios.iter().map(|f| f.max_ratio).collect::<Vec<_>>(),
                    th.ratio_agreement
                ),
            ));
            let fits = |v: &[crate::renewal::LinearFit]| -> Vec<Value> {
                v.iter()
                    .map(|f| json!({"slope": f.slope, "intercept": f.intercept, "max_ratio": f.max_ratio}))
                    .collect()
            };
            json!({
                "rows": rows.len(),
                "worst_censored_fraction": worst,
                "same_index_fits": fits(&ratios),
                "same_index_ratio_spread": rel,
                "range_fits": fits(&range_ratios),
                "range_ratio_spread": spread(&range_ratios),
            })
        }
        ExperimentKind::MidpointCheck => {
            let trials: Vec<&MidpointTrial> = outcomes
                .iter()
                .filter_map(|o| match o {
                    TrialOutcome::Midpoint(t) => Some(t),
                    _ => None,
                })
                .collect();
            let clean = trials.iter().filter(|t| t.false_top == 0).count();
            assertions.push(Assertion::new(
                "top_window_clean",
                fraction(clean, trials.len()) >= th.min_pass_fraction,
                format!(
                    "{clean}/{} trials have no false verdict in the top decidable window (need fraction >= {})",
                    trials.len(),
                    th.min_pass_fraction
                ),
            ));
            let w = &config.window;
            let mut rng = rng_from_seed(derive_seed(config.master_seed, trials.len() as u64));
            let tail = blackwell_tail(dist, w.n_window, w.tail_trials, w.cap, &mut rng)?;
            let change = tail.last_decade_change();
            assertions.push(Assertion::new(
                "blackwell_stable",
                change < th.tail_stability,
                format!(
                    "partial sum of P(I >= n) changes by {change} over the last decade of n <= {} (limit {})",
                    w.n_window, th.tail_stability
                ),
            ));
            let false_total: u64 = trials.iter().map(|t| t.false_total).sum();
            json!({
                "trials": trials.len(),
                "top_window_clean": clean,
                "false_total": false_total,
                "undecided_total": trials.iter().map(|t| t.undecided).sum::<usize>(),
                "blackwell_partial_sum": tail.partial_sums.last(),
                "blackwell_last_decade_change": change,
                "blackwell_censored": tail.censored,
            })
        }
    };
    Ok((assertions, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_example_is_exact() {
        let r = residue_example().unwrap();
        assert_eq!(r.sigma_a, Ratio::new(1, 3));
        assert_eq!(r.sigma_sum, Ratio::new(2, 3));
        assert!(r.inequality_holds && !r.window_complete);
    }

    #[test]
    fn unit_prefix_construction_beats_half() {
        let d = GapDistribution::geometric(0.6).unwrap();
        let t = density_trial(&d, 2, 100_000, 3).unwrap();
        assert_eq!(t.case, 1);
        assert!(t.relative_error < 0.02, "{t:?}");
        assert!(t.sigma_construction.unwrap() > Ratio::new(1, 2));
    }

    #[test]
    fn shifted_construction_without_unit_gaps() {
        // support {2, 3, 4, ...}: x0 = 2, x' = 3, E X = 2.5 < k = 3
        let pmf: Vec<(u64, f64)> = vec![(2, 0.6), (3, 0.3), (4, 0.1)];
        let d = GapDistribution::finite_pmf(&pmf).unwrap();
        let t = density_trial(&d, 3, 50_000, 8).unwrap();
        assert_eq!(t.case, 2);
        assert!(t.n0.is_some());
        assert!(t.sigma_construction.unwrap() >= Ratio::new(1, 3), "{t:?}");
    }
}
