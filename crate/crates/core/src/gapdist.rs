//! Gap laws on the positive integers.
//!
//! A [`GapDistribution`] is immutable after construction and is shared freely
//! across trial threads. All randomness comes from the caller's
//! [`TrialRng`](crate::seed::TrialRng), so a draw sequence is a pure function
//! of the distribution and the seed.

use num_integer::Integer;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Geometric, StandardGeometric, Zeta, Zipf};
use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::seed::TrialRng;
use crate::{Error, Result};

/// Relative tolerance on the total mass of a finite pmf.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Relative accuracy targeted by series moments.
pub const MOMENT_TOLERANCE: f64 = 1e-9;

/// The JSON form of a gap law, as it appears in experiment configs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<(u64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GapLaw {
    /// Strictly increasing support values with their masses.
    FinitePmf { values: Vec<u64>, masses: Vec<f64> },
    /// `P(X = j) = p (1 - p)^(j - 1)` for `j >= 1`.
    Geometric { p: f64 },
    /// `P(X = j) = j^(-alpha) / normalizer` on `1..=truncation` (or all of
    /// the positive integers).
    PowerTail {
        alpha: f64,
        truncation: Option<u64>,
        normalizer: f64,
    },
}

#[derive(Clone, Debug)]
enum Sampler {
    Alias(WeightedAliasIndex<f64>),
    Geometric(Geometric),
    Fair(StandardGeometric),
    Zeta(Zeta<f64>),
    Zipf(Zipf<f64>),
}

#[derive(Clone, Debug)]
pub struct GapDistribution {
    law: GapLaw,
    label: String,
    sampler: Sampler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentValue {
    Finite(f64),
    Infinite,
}

impl MomentValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, MomentValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            MomentValue::Finite(v) => Some(v),
            MomentValue::Infinite => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    ClosedForm,
    SeriesPartialSum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentReport {
    pub order: f64,
    pub value: MomentValue,
    pub method: MomentMethod,
}

#[derive(Clone, Debug)]
pub struct SupportReport {
    pub gcd: u64,
    pub x0: u64,
    /// Least support element `x <= bound` with `x - 1` in the generated monoid.
    pub x_prime: Option<u64>,
    /// Bit `t` is set iff `t <= bound` is a nonnegative integer combination of
    /// support elements.
    pub monoid_membership: BitSet,
}

/// Validates a [`DistributionSpec`] and builds the distribution it names.
pub fn make_distribution(spec: &DistributionSpec) -> Result<GapDistribution> {
    let mut dist = match spec.kind.as_str() {
        "finite-pmf" => {
            let pmf = spec
                .pmf
                .as_ref()
                .ok_or_else(|| Error::InvalidDistribution("finite-pmf needs \"pmf\"".into()))?;
            GapDistribution::finite_pmf(pmf)?
        }
        "geometric" => {
            let p = spec
                .p
                .ok_or_else(|| Error::InvalidDistribution("geometric needs \"p\"".into()))?;
            GapDistribution::geometric(p)?
        }
        "power-tail" => {
            let alpha = spec
                .alpha
                .ok_or_else(|| Error::InvalidDistribution("power-tail needs \"alpha\"".into()))?;
            GapDistribution::power_tail(alpha, spec.truncation)?
        }
        other => {
            return Err(Error::InvalidDistribution(format!(
                "unknown kind {other:?} (expected finite-pmf, geometric or power-tail)"
            )))
        }
    };
    if let Some(label) = &spec.label {
        dist.label = label.clone();
    }
    Ok(dist)
}

impl GapDistribution {
    pub fn finite_pmf(pairs: &[(u64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution("empty pmf".into()));
        }
        let mut prev = 0u64;
        for &(value, mass) in pairs {
            if value == 0 {
                return Err(Error::InvalidDistribution(
                    "support values must be positive integers".into(),
                ));
            }
            if value <= prev {
                return Err(Error::InvalidDistribution(
                    "support values must be strictly increasing".into(),
                ));
            }
            if !(mass > 0.0 && mass <= 1.0) {
                return Err(Error::InvalidDistribution(format!(
                    "mass {mass} of value {value} is outside (0, 1]"
                )));
            }
            prev = value;
        }
        let total: f64 = pairs.iter().map(|&(_, m)| m).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, not 1"
            )));
        }
        let values: Vec<u64> = pairs.iter().map(|&(v, _)| v).collect();
        let masses: Vec<f64> = pairs.iter().map(|&(_, m)| m).collect();
        let alias = WeightedAliasIndex::new(masses.clone())
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(Self {
            label: format!("finite-pmf({} points)", values.len()),
            law: GapLaw::FinitePmf { values, masses },
            sampler: Sampler::Alias(alias),
        })
    }

    pub fn point_mass(value: u64) -> Result<Self> {
        Self::finite_pmf(&[(value, 1.0)])
    }

    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "geometric p = {p} is outside (0, 1)"
            )));
        }
        let sampler = if p == 0.5 {
            Sampler::Fair(StandardGeometric)
        } else {
            Sampler::Geometric(
                Geometric::new(p).map_err(|e| Error::InvalidDistribution(e.to_string()))?,
            )
        };
        Ok(Self {
            label: format!("geometric(p={p})"),
            law: GapLaw::Geometric { p },
            sampler,
        })
    }

    pub fn power_tail(alpha: f64, truncation: Option<u64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "power-tail alpha = {alpha} must exceed 1"
            )));
        }
        if truncation == Some(0) {
            return Err(Error::InvalidDistribution(
                "power-tail truncation must be at least 1".into(),
            ));
        }
        let normalizer = power_sum(alpha, truncation, MASS_TOLERANCE);
        let sampler = match truncation {
            None => Sampler::Zeta(
                Zeta::new(alpha).map_err(|e| Error::InvalidDistribution(e.to_string()))?,
            ),
            Some(t) => Sampler::Zipf(
                Zipf::new(t as f64, alpha)
                    .map_err(|e| Error::InvalidDistribution(e.to_string()))?,
            ),
        };
        let label = match truncation {
            None => format!("power-tail(alpha={alpha})"),
            Some(t) => format!("power-tail(alpha={alpha}, truncation={t})"),
        };
        Ok(Self {
            label,
            law: GapLaw::PowerTail {
                alpha,
                truncation,
                normalizer,
            },
            sampler,
        })
    }

    pub fn law(&self) -> &GapLaw {
        &self.law
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Round-trips to the JSON form accepted by [`make_distribution`].
    pub fn spec(&self) -> DistributionSpec {
        let mut spec = DistributionSpec {
            label: Some(self.label.clone()),
            ..Default::default()
        };
        match &self.law {
            GapLaw::FinitePmf { values, masses } => {
                spec.kind = "finite-pmf".into();
                spec.pmf = Some(values.iter().copied().zip(masses.iter().copied()).collect());
            }
            GapLaw::Geometric { p } => {
                spec.kind = "geometric".into();
                spec.p = Some(*p);
            }
            GapLaw::PowerTail {
                alpha, truncation, ..
            } => {
                spec.kind = "power-tail".into();
                spec.alpha = Some(*alpha);
                spec.truncation = *truncation;
            }
        }
        spec
    }

    /// `P(X = j)`.
    pub fn pmf(&self, j: u64) -> f64 {
        match &self.law {
            GapLaw::FinitePmf { values, masses } => values
                .binary_search(&j)
                .map(|i| masses[i])
                .unwrap_or(0.0),
            GapLaw::Geometric { p } => {
                if j == 0 {
                    0.0
                } else {
                    p * (1.0 - p).powf((j - 1) as f64)
                }
            }
            GapLaw::PowerTail {
                alpha,
                truncation,
                normalizer,
            } => {
                if j == 0 || truncation.is_some_and(|t| j > t) {
                    0.0
                } else {
                    (j as f64).powf(-alpha) / normalizer
                }
            }
        }
    }

    /// True when the support is a single point.
    pub fn is_degenerate(&self) -> bool {
        match &self.law {
            GapLaw::FinitePmf { values, .. } => values.len() == 1,
            GapLaw::PowerTail { truncation, .. } => *truncation == Some(1),
            GapLaw::Geometric { .. } => false,
        }
    }

    /// Draws one gap. Gaps too large for `u64` saturate, which is harmless
    /// since every consumer truncates at a horizon far below `u64::MAX`.
    pub fn sample(&self, rng: &mut TrialRng) -> u64 {
        match &self.sampler {
            Sampler::Alias(alias) => match &self.law {
                GapLaw::FinitePmf { values, .. } => values[alias.sample(rng)],
                _ => unreachable!("alias sampler only backs finite pmfs"),
            },
            Sampler::Geometric(g) => g.sample(rng).saturating_add(1),
            Sampler::Fair(g) => g.sample(rng).saturating_add(1),
            Sampler::Zeta(z) => float_to_gap(z.sample(rng)),
            Sampler::Zipf(z) => float_to_gap(z.sample(rng)),
        }
    }

    pub fn mean(&self) -> MomentValue {
        self.moment(1.0).value
    }

    /// `E X^order` for `order > 0`.
    pub fn moment(&self, order: f64) -> MomentReport {
        assert!(order > 0.0, "moment order must be positive");
        let (value, method) = match &self.law {
            GapLaw::FinitePmf { values, masses } => (
                MomentValue::Finite(
                    values
                        .iter()
                        .zip(masses)
                        .map(|(&v, &m)| (v as f64).powf(order) * m)
                        .sum(),
                ),
                MomentMethod::ClosedForm,
            ),
            GapLaw::Geometric { p } => {
                let p = *p;
                if order == 1.0 {
                    (MomentValue::Finite(1.0 / p), MomentMethod::ClosedForm)
                } else if order == 2.0 {
                    (
                        MomentValue::Finite((2.0 - p) / (p * p)),
                        MomentMethod::ClosedForm,
                    )
                } else {
                    (
                        MomentValue::Finite(geometric_series_moment(p, order)),
                        MomentMethod::SeriesPartialSum,
                    )
                }
            }
            GapLaw::PowerTail {
                alpha,
                truncation,
                normalizer,
            } => {
                if truncation.is_none() && order >= alpha - 1.0 {
                    (MomentValue::Infinite, MomentMethod::ClosedForm)
                } else {
                    let numerator = power_sum(alpha - order, *truncation, MOMENT_TOLERANCE);
                    (
                        MomentValue::Finite(numerator / normalizer),
                        MomentMethod::SeriesPartialSum,
                    )
                }
            }
        };
        MomentReport {
            order,
            value,
            method,
        }
    }

    /// gcd of the support; 1 for the geometric and power-tail families, whose
    /// supports contain 1.
    pub fn support_gcd(&self) -> u64 {
        match &self.law {
            GapLaw::FinitePmf { values, .. } => values.iter().fold(0, |g, &v| g.gcd(&v)),
            _ => 1,
        }
    }

    /// Support elements `<= bound`, ascending.
    pub fn support_up_to(&self, bound: u64) -> Vec<u64> {
        match &self.law {
            GapLaw::FinitePmf { values, .. } => {
                values.iter().copied().take_while(|&v| v <= bound).collect()
            }
            GapLaw::Geometric { .. } => (1..=bound).collect(),
            GapLaw::PowerTail { truncation, .. } => {
                (1..=truncation.map_or(bound, |t| t.min(bound))).collect()
            }
        }
    }

    pub fn support_analysis(&self, bound: u64) -> Result<SupportReport> {
        let x0 = match &self.law {
            GapLaw::FinitePmf { values, .. } => values[0],
            _ => 1,
        };
        if bound < x0 {
            return Err(Error::BoundTooSmall { bound, x0 });
        }
        analyze_support(&self.support_up_to(bound), bound)
    }
}

fn float_to_gap(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x as u64
    }
}

/// Monoid membership and `x'` for an explicit (ascending) support list.
///
/// Elements above `bound` are ignored; the reported gcd is that of the
/// elements at or below `bound`.
pub fn analyze_support(support: &[u64], bound: u64) -> Result<SupportReport> {
    let mut support: Vec<u64> = support.iter().copied().filter(|&s| s > 0).collect();
    support.sort_unstable();
    support.dedup();
    let x0 = *support
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty support".into()))?;
    if bound < x0 {
        return Err(Error::BoundTooSmall { bound, x0 });
    }
    support.retain(|&s| s <= bound);
    let gcd = support.iter().fold(0u64, |g, &s| g.gcd(&s));

    let len = usize::try_from(bound).expect("bound fits in memory") + 1;
    let mut member = BitSet::new(len);
    member.insert(0);
    for t in 1..len {
        let reachable = support
            .iter()
            .take_while(|&&s| s as usize <= t)
            .any(|&s| member.contains(t - s as usize));
        if reachable {
            member.insert(t);
        }
    }
    let x_prime = support
        .iter()
        .copied()
        .find(|&x| member.contains((x - 1) as usize));
    Ok(SupportReport {
        gcd,
        x0,
        x_prime,
        monoid_membership: member,
    })
}

/// `sum_{j >= 1} j^order p (1-p)^(j-1)` by partial sums, stopped once the
/// geometric tail bound falls below the target relative accuracy.
fn geometric_series_moment(p: f64, order: f64) -> f64 {
    let q = 1.0 - p;
    let mut sum = 0.0;
    let mut j = 1u64;
    let mut weight = p;
    loop {
        let jf = j as f64;
        sum += jf.powf(order) * weight;
        weight *= q;
        // For i > j the term ratio is at most ((j + 2) / (j + 1))^order * q.
        let next = (jf + 1.0).powf(order) * weight;
        let ratio = ((jf + 2.0) / (jf + 1.0)).powf(order.max(0.0)) * q;
        if ratio < 1.0 {
            let tail = next / (1.0 - ratio);
            if tail <= MOMENT_TOLERANCE * sum {
                return sum + tail / 2.0;
            }
        }
        j += 1;
    }
}

/// `sum_{j=1}^{upto} j^(-s)` (all `j` when `upto` is `None`) for `s > 1`, to
/// relative accuracy `rel_tol`.
///
/// A direct partial sum is taken up to a cutoff `a`; the rest of the series
/// is the Euler-Maclaurin expansion of `sum_{j >= a} j^(-s)`. Since `x^(-s)`
/// is completely monotone, the first omitted correction bounds the error, and
/// `a` is doubled until that bound meets `rel_tol`.
pub fn power_sum(s: f64, upto: Option<u64>, rel_tol: f64) -> f64 {
    const DIRECT_LIMIT: u64 = 1 << 16;
    if let Some(t) = upto {
        if t <= DIRECT_LIMIT {
            return (1..=t).rev().map(|j| (j as f64).powf(-s)).sum();
        }
    }
    let mut cutoff = 16u64;
    loop {
        let head: f64 = (1..cutoff).rev().map(|j| (j as f64).powf(-s)).sum();
        let (tail, err) = zeta_tail(s, cutoff as f64);
        let (tail, err) = match upto {
            None => (tail, err),
            Some(t) => {
                let (far, far_err) = zeta_tail(s, (t + 1) as f64);
                (tail - far, err + far_err)
            }
        };
        let total = head + tail;
        if err <= rel_tol * total || cutoff >= DIRECT_LIMIT {
            return total;
        }
        cutoff *= 2;
    }
}

/// Euler-Maclaurin estimate of `sum_{j >= a} j^(-s)` with its error bound.
fn zeta_tail(s: f64, a: f64) -> (f64, f64) {
    // B_{2i} / (2i)! for i = 1..=4.
    const COEF: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut total = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s (s+1) ... (s + 2i - 2) times a^(-s - 2i + 1)
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    for (i, &c) in COEF.iter().enumerate() {
        let term = c * rising * power;
        if i == COEF.len() - 1 {
            return (total, term.abs());
        }
        total += term;
        let base = s + (2 * i + 1) as f64;
        rising *= base * (base + 1.0);
        power /= a * a;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn finite_pmf_gcd_two() {
        let d = GapDistribution::finite_pmf(&[(2, 0.5), (4, 0.5)]).unwrap();
        assert_eq!(d.support_gcd(), 2);
        let d = GapDistribution::finite_pmf(&[(3, 0.5), (5, 0.5)]).unwrap();
        assert_eq!(d.support_gcd(), 1);
        assert_eq!(GapDistribution::geometric(0.3).unwrap().support_gcd(), 1);
        assert_eq!(GapDistribution::power_tail(2.0, None).unwrap().support_gcd(), 1);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(GapDistribution::finite_pmf(&[(0, 1.0)]).is_err());
        assert!(GapDistribution::finite_pmf(&[(1, 0.5), (2, 0.4)]).is_err());
        assert!(GapDistribution::finite_pmf(&[(2, 0.5), (1, 0.5)]).is_err());
        assert!(GapDistribution::finite_pmf(&[(2, 0.5), (2, 0.5)]).is_err());
        assert!(GapDistribution::finite_pmf(&[]).is_err());
        assert!(GapDistribution::geometric(0.0).is_err());
        assert!(GapDistribution::geometric(1.0).is_err());
        assert!(GapDistribution::power_tail(1.0, None).is_err());
        assert!(GapDistribution::power_tail(0.5, Some(10)).is_err());
        assert!(GapDistribution::power_tail(2.0, Some(0)).is_err());
    }

    #[test]
    fn make_distribution_from_spec() {
        let spec: DistributionSpec =
            serde_json::from_str(r#"{"kind": "finite-pmf", "pmf": [[1, 0.25], [3, 0.75]], "label": "x"}"#)
                .unwrap();
        let d = make_distribution(&spec).unwrap();
        assert_eq!(d.label(), "x");
        assert_eq!(d.pmf(3), 0.75);
        let back = make_distribution(&d.spec()).unwrap();
        assert_eq!(back.law(), d.law());

        let bad: DistributionSpec = serde_json::from_str(r#"{"kind": "geometric"}"#).unwrap();
        assert!(make_distribution(&bad).is_err());
        let bad: DistributionSpec = serde_json::from_str(r#"{"kind": "uniform"}"#).unwrap();
        assert!(make_distribution(&bad).is_err());
    }

    #[test]
    fn geometric_mean_closed_form_and_series_agree() {
        let d = GapDistribution::geometric(0.6).unwrap();
        let r = d.moment(1.0);
        assert_eq!(r.method, MomentMethod::ClosedForm);
        let mean = r.value.finite().unwrap();
        assert!((mean - 5.0 / 3.0).abs() < 1e-15);
        assert!(mean < 2.0);
        // independent route: partial sums of j P(X = j)
        let series: f64 = (1..2000).map(|j| j as f64 * d.pmf(j)).sum();
        assert!((series - mean).abs() < 1e-12);
        let second = d.moment(2.0).value.finite().unwrap();
        assert!((second - 3.888_888_888_888_889).abs() < 1e-12);
    }

    #[test]
    fn geometric_fractional_moments_match_frozen_values() {
        // mpmath nsum over the full series
        let d = GapDistribution::geometric(0.6).unwrap();
        let r = d.moment(0.5);
        assert_eq!(r.method, MomentMethod::SeriesPartialSum);
        let v = r.value.finite().unwrap();
        assert!((v / 1.243_201_309_181_305_5 - 1.0).abs() < 1e-9, "{v}");
        let d = GapDistribution::geometric(0.3).unwrap();
        let v = d.moment(1.5).value.finite().unwrap();
        assert!((v / 7.486_466_809_832_107 - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn power_tail_half_moment_is_infinite_at_alpha_1_3() {
        let d = GapDistribution::power_tail(1.3, None).unwrap();
        assert_eq!(d.moment(0.5).value, MomentValue::Infinite);
        assert_eq!(d.mean(), MomentValue::Infinite);
        // partial sums of j^(0.5 - 1.3) keep growing like j^0.2 / 0.2
        let partial = |n: u64| -> f64 { (1..=n).map(|j| (j as f64).powf(-0.8)).sum() };
        let (a, b, c) = (partial(1_000), partial(10_000), partial(100_000));
        assert!(b - a > 4.0 && c - b > 4.0 * 1.5, "{a} {b} {c}");
    }

    #[test]
    fn power_tail_normalizer_matches_zeta() {
        let d = GapDistribution::power_tail(1.3, None).unwrap();
        let GapLaw::PowerTail { normalizer, .. } = d.law() else {
            unreachable!()
        };
        // zeta(1.3) from mpmath
        assert!((normalizer / 3.931_949_211_809_543_6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_tail_second_moment_finite_at_alpha_3_5() {
        let d = GapDistribution::power_tail(3.5, None).unwrap();
        let v = d.moment(2.0).value.finite().unwrap();
        // zeta(1.5) / zeta(3.5)
        assert!((v / 2.318_538_054_515_033_4 - 1.0).abs() < 1e-9, "{v}");
        // partial sums approach it from below with the integral tail 2/sqrt(n)
        let z35: f64 = (1..=1_000_000u64).rev().map(|j| (j as f64).powf(-3.5)).sum();
        let s15: f64 = (1..=1_000_000u64).rev().map(|j| (j as f64).powf(-1.5)).sum();
        let partial = s15 / z35;
        assert!(partial < v && v - partial < 2.1e-3 / z35);
        assert!(d.moment(2.5).value == MomentValue::Infinite);
    }

    #[test]
    fn truncated_power_tail_has_all_moments() {
        let d = GapDistribution::power_tail(2.0, Some(100)).unwrap();
        let mean = d.mean().finite().unwrap();
        assert!((mean - 3.172_739_203_764_027).abs() < 1e-12);
        assert!(d.moment(5.0).value.is_finite());
        let big = GapDistribution::power_tail(2.5, Some(10_000_000)).unwrap();
        let direct: f64 = (1..=10_000_000u64).rev().map(|j| (j as f64).powf(-1.5)).sum::<f64>()
            / (1..=10_000_000u64).rev().map(|j| (j as f64).powf(-2.5)).sum::<f64>();
        let m = big.mean().finite().unwrap();
        assert!((m / direct - 1.0).abs() < 1e-9, "{m} vs {direct}");
    }

    #[test]
    fn finite_pmf_moment_exact() {
        let d = GapDistribution::finite_pmf(&[(1, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(d.moment(1.0).value, MomentValue::Finite(2.0));
        assert_eq!(d.moment(2.0).value, MomentValue::Finite(5.0));
    }

    #[test]
    fn point_mass_always_returns_its_value() {
        let d = GapDistribution::point_mass(3).unwrap();
        let mut rng = rng_from_seed(1);
        assert!((0..1000).all(|_| d.sample(&mut rng) == 3));
        assert!(d.is_degenerate());
    }

    #[test]
    fn geometric_half_empirical_mean() {
        let d = GapDistribution::geometric(0.5).unwrap();
        let mut rng = rng_from_seed(2024);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn empirical_frequencies_follow_pmf() {
        for d in [
            GapDistribution::finite_pmf(&[(2, 0.2), (5, 0.3), (7, 0.5)]).unwrap(),
            GapDistribution::power_tail(2.5, None).unwrap(),
            GapDistribution::power_tail(1.5, Some(20)).unwrap(),
        ] {
            let mut rng = rng_from_seed(99);
            let n = 200_000usize;
            let mut counts = [0usize; 8];
            for _ in 0..n {
                let x = d.sample(&mut rng);
                if x < 8 {
                    counts[x as usize] += 1;
                }
            }
            for (j, &c) in counts.iter().enumerate().skip(1) {
                let p = d.pmf(j as u64);
                let sd = (p * (1.0 - p) / n as f64).sqrt();
                let freq = c as f64 / n as f64;
                assert!((freq - p).abs() <= 5.0 * sd + 1e-12, "{} j={j}: {freq} vs {p}", d.label());
            }
        }
    }

    #[test]
    fn fixed_seed_replays_draws() {
        for d in [
            GapDistribution::geometric(0.4).unwrap(),
            GapDistribution::power_tail(1.3, None).unwrap(),
            GapDistribution::finite_pmf(&[(1, 0.5), (4, 0.5)]).unwrap(),
        ] {
            let mut a = rng_from_seed(77);
            let mut b = rng_from_seed(77);
            let xs: Vec<u64> = (0..1000).map(|_| d.sample(&mut a)).collect();
            let ys: Vec<u64> = (0..1000).map(|_| d.sample(&mut b)).collect();
            assert_eq!(xs, ys);
        }
    }

    #[test]
    fn odd_support_x_prime_is_seven() {
        let odd: Vec<u64> = (3..=20).step_by(2).collect();
        let r = analyze_support(&odd, 20).unwrap();
        assert_eq!(r.x0, 3);
        assert_eq!(r.gcd, 1);
        assert!(r.monoid_membership.contains(6));
        assert!(!r.monoid_membership.contains(2) && !r.monoid_membership.contains(4));
        assert_eq!(r.x_prime, Some(7));
    }

    #[test]
    fn support_with_one_has_x_prime_one() {
        let d = GapDistribution::geometric(0.5).unwrap();
        let r = d.support_analysis(10).unwrap();
        assert_eq!(r.x_prime, Some(1));
        assert_eq!(r.monoid_membership.count_ones(), 11);
    }

    #[test]
    fn x_prime_absent_for_three_and_five() {
        let d = GapDistribution::finite_pmf(&[(3, 0.5), (5, 0.5)]).unwrap();
        let r = d.support_analysis(30).unwrap();
        assert_eq!(r.x_prime, None);
        // 0,3,5,6,8,9,10,11,... : Frobenius number 7
        let members: Vec<usize> = r.monoid_membership.iter_ones().take_while(|&t| t <= 12).collect();
        assert_eq!(members, vec![0, 3, 5, 6, 8, 9, 10, 11, 12]);
    }

    #[test]
    fn support_bound_below_x0_is_an_error() {
        let d = GapDistribution::finite_pmf(&[(3, 0.5), (5, 0.5)]).unwrap();
        assert!(matches!(
            d.support_analysis(2),
            Err(Error::BoundTooSmall { bound: 2, x0: 3 })
        ));
    }

    proptest! {
        #[test]
        fn moments_are_monotone_in_finiteness(alpha in 1.05f64..6.0, r in 0.05f64..6.0, dr in 0.0f64..3.0) {
            let d = GapDistribution::power_tail(alpha, None).unwrap();
            if d.moment(r + dr).value.is_finite() {
                prop_assert!(d.moment(r).value.is_finite());
            }
            prop_assert_eq!(d.moment(r).value.is_finite(), r < alpha - 1.0);
        }

        #[test]
        fn monoid_closed_and_gcd_respected(
            support in proptest::collection::btree_set(1u64..25, 1..5),
            bound in 25u64..120,
        ) {
            let support: Vec<u64> = support.into_iter().collect();
            let r = analyze_support(&support, bound).unwrap();
            let m = &r.monoid_membership;
            for t in m.iter_ones() {
                prop_assert_eq!(t as u64 % r.gcd, 0);
                for &s in &support {
                    if t as u64 + s <= bound {
                        prop_assert!(m.contains(t + s as usize));
                    }
                }
            }
            if let Some(x) = r.x_prime {
                prop_assert!(m.contains(x as usize - 1));
                prop_assert!(support.iter().filter(|&&s| s < x).all(|&s| !m.contains(s as usize - 1)));
            }
        }
    }
}
