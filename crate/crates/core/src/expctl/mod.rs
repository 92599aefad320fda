//! Declarative experiment runner.
//!
//! An [`ExperimentConfig`] names a kind, a gap law and the desk-scale
//! parameters. Trials run in parallel, each from its own derived seed, and
//! rows are written sorted by trial index so the CSV does not depend on the
//! schedule. A JSON manifest next to it echoes the config and records the
//! assertion outcomes.

mod kinds;
mod profile;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gapdist::{make_distribution, DistributionSpec, GapDistribution};
use crate::seed::derive_seed;
use crate::{Error, Result};

pub use kinds::{residue_example, DensityTrial, MannTrial, RenewalRow, TrialOutcome};
pub use profile::{
    dyadic_windows, exceptional_profile, midpoint_profile, midpoint_trial, profile_trial, ExceptionalProfile,
    MidpointTrial, ProfileTrial,
};

pub const RECORDS_FILE: &str = "trials.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CompletenessProfile,
    HeavyTailNegative,
    DensityConvergence,
    MannSuite,
    RenewalSweep,
    MidpointCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_pass_fraction: f64,
    pub last_exception_cutoff: u64,
    /// Relative tolerance on `A(N)/N` against `1 / E X`.
    pub density_tolerance: f64,
    pub censor_threshold: f64,
    /// Allowed relative spread of `maxRatio` across renewal batches.
    pub ratio_agreement: f64,
    pub tail_stability: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_pass_fraction: 0.95,
            last_exception_cutoff: 10_000,
            density_tolerance: 0.02,
            censor_threshold: 1e-3,
            ratio_agreement: 0.10,
            tail_stability: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowParams {
    /// Renewal sweep runs `b = 1..=b_max`.
    pub b_max: u64,
    /// Step budget for meeting-time runs.
    pub cap: u64,
    /// Disjoint seed batches in a renewal sweep.
    pub batches: u64,
    /// Largest `n` in the Blackwell tail table.
    pub n_window: usize,
    pub tail_trials: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            b_max: 50,
            cap: 1_000_000,
            batches: 2,
            n_window: 1_000,
            tail_trials: 10_000,
        }
    }
}

fn default_k() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub distribution: DistributionSpec,
    #[serde(default = "default_k")]
    pub k: u32,
    /// `N`; for `mann-suite` the sets live in `[0, N]`.
    pub horizon: u64,
    /// Trials, or Monte Carlo runs per `(batch, b)` row for `renewal-sweep`.
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub window: WindowParams,
    /// Output directory for the CSV and manifest.
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Number of CSV rows the run produces.
    pub fn row_count(&self) -> usize {
        match self.kind {
            ExperimentKind::RenewalSweep => (self.window.batches * self.window.b_max) as usize,
            _ => self.trials,
        }
    }

    /// Checks every parameter and builds the gap law. Nothing is sampled.
    pub fn validate(&self) -> Result<GapDistribution> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.horizon < 10 {
            return bad(format!("horizon {} is below 10", self.horizon));
        }
        if self.horizon > u64::from(u32::MAX) {
            return bad(format!("horizon {} does not fit a table", self.horizon));
        }
        let th = &self.thresholds;
        if !(0.0..=1.0).contains(&th.min_pass_fraction) {
            return bad("min_pass_fraction must lie in [0, 1]".into());
        }
        let dist = make_distribution(&self.distribution).map_err(|e| Error::Config(e.to_string()))?;
        match self.kind {
            ExperimentKind::CompletenessProfile | ExperimentKind::HeavyTailNegative => {
                if self.k == 0 {
                    return bad("k must be at least 1".into());
                }
                profile::check_gcd(&dist).map_err(|e| Error::Config(e.to_string()))?;
            }
            ExperimentKind::DensityConvergence => {
                if self.k < 2 {
                    return bad("k must be at least 2".into());
                }
                match dist.mean().finite() {
                    Some(m) if m < f64::from(self.k) => {}
                    _ => return bad(format!("density-convergence needs E X < k = {}", self.k)),
                }
                profile::check_gcd(&dist).map_err(|e| Error::Config(e.to_string()))?;
            }
            ExperimentKind::MannSuite => {}
            ExperimentKind::RenewalSweep => {
                if dist.is_degenerate() {
                    return bad(format!("{} is degenerate: same-index meeting is impossible", dist.label()));
                }
                if self.trials < 100 {
                    return bad("renewal-sweep needs at least 100 trials per row".into());
                }
                let w = &self.window;
                if w.b_max < 3 || w.batches < 1 || w.cap < 1 {
                    return bad("renewal-sweep needs b_max >= 3, batches >= 1, cap >= 1".into());
                }
            }
            ExperimentKind::MidpointCheck => {
                profile::check_midpoint_law(&dist).map_err(|e| Error::Config(e.to_string()))?;
                let w = &self.window;
                if w.n_window < 10 || w.tail_trials < 1 || w.cap < 1 {
                    return bad("midpoint-check needs n_window >= 10, tail_trials >= 1, cap >= 1".into());
                }
            }
        }
        Ok(dist)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub derived_seed: u64,
    pub fields: Vec<(String, String)>,
    pub wall_clock_ms: u64,
}

impl TrialRecord {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == column).map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<TrialRecord>,
    pub outcomes: Vec<TrialOutcome>,
    pub assertions: Vec<Assertion>,
    pub summary: serde_json::Value,
    pub runtime: Duration,
    pub threads: usize,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub runtime_ms: u64,
    pub records: String,
    pub rows: usize,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub summary: serde_json::Value,
}

fn timed_trial(config: &ExperimentConfig, dist: &GapDistribution, index: u64) -> Result<(TrialOutcome, TrialRecord)> {
    let start = Instant::now();
    let outcome = kinds::run_trial(config, dist, index)?;
    let record = TrialRecord {
        trial_index: index,
        derived_seed: derive_seed(config.master_seed, index),
        fields: outcome.fields(config.horizon),
        wall_clock_ms: start.elapsed().as_millis() as u64,
    };
    Ok((outcome, record))
}

/// Validates, runs every trial and assesses the kind's assertions. Writes
/// nothing.
pub fn execute(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    let dist = config.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let (outcomes, records, assessed) = pool.install(|| -> Result<_> {
        let rows: Vec<(TrialOutcome, TrialRecord)> = (0..config.row_count() as u64)
            .into_par_iter()
            .map(|i| timed_trial(config, &dist, i))
            .collect::<Result<_>>()?;
        let (outcomes, records): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let assessed = kinds::assess(config, &dist, &outcomes)?;
        Ok((outcomes, records, assessed))
    })?;
    let (assertions, summary) = assessed;
    Ok(ExperimentOutcome {
        records,
        outcomes,
        assertions,
        summary,
        runtime: start.elapsed(),
        threads,
    })
}

/// Reruns one row of an experiment from its derived seed.
pub fn replay(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    let dist = config.validate()?;
    if trial_index as usize >= config.row_count() {
        return Err(Error::IndexOutOfBounds {
            index: trial_index as usize,
            len: config.row_count(),
        });
    }
    Ok(timed_trial(config, &dist, trial_index)?.1)
}

/// CSV of the records. `wall_clock_ms` is the last column so it can be cut
/// before comparing runs.
pub fn write_records<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = records.first() {
        let mut header = vec!["trial_index".to_string(), "derived_seed".to_string()];
        header.extend(first.fields.iter().map(|(k, _)| k.clone()));
        header.push("wall_clock_ms".into());
        w.write_record(&header)?;
    }
    for r in records {
        let mut row = vec![r.trial_index.to_string(), r.derived_seed.to_string()];
        row.extend(r.fields.iter().map(|(_, v)| v.clone()));
        row.push(r.wall_clock_ms.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn manifest(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> Manifest {
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        threads: outcome.threads,
        runtime_ms: outcome.runtime.as_millis() as u64,
        records: RECORDS_FILE.into(),
        rows: outcome.records.len(),
        passed: outcome.passed(),
        assertions: outcome.assertions.clone(),
        summary: outcome.summary.clone(),
    }
}

pub fn write_outputs(config: &ExperimentConfig, outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records(&outcome.records, fs::File::create(dir.join(RECORDS_FILE))?)?;
    let text = serde_json::to_string_pretty(&manifest(config, outcome))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Process exit status of an experiment run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Passed = 0,
    AssertionFailed = 1,
    InvalidConfig = 2,
    Io = 3,
}

impl RunStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => RunStatus::Io,
            _ => RunStatus::InvalidConfig,
        }
    }
}

/// Loads, runs and writes one experiment. `out` overrides the config's
/// output directory. Invalid configs return before anything is written.
pub fn run_experiment(
    config_path: &Path,
    out: Option<&Path>,
    threads: Option<usize>,
) -> (RunStatus, Result<ExperimentOutcome>) {
    let config = match ExperimentConfig::load(config_path).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return (RunStatus::InvalidConfig, Err(e)),
    };
    let outcome = match execute(&config, threads) {
        Ok(o) => o,
        Err(e) => return (RunStatus::of_error(&e), Err(e)),
    };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output.clone());
    if let Err(e) = write_outputs(&config, &outcome, &dir) {
        return (RunStatus::Io, Err(e));
    }
    let status = if outcome.passed() {
        RunStatus::Passed
    } else {
        RunStatus::AssertionFailed
    };
    (status, Ok(outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: ExperimentKind, dist: DistributionSpec, horizon: u64, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            distribution: dist,
            k: 2,
            horizon,
            trials,
            master_seed: 7,
            thresholds: Thresholds::default(),
            window: WindowParams::default(),
            output: PathBuf::from("unused"),
        }
    }

    fn geometric(p: f64) -> DistributionSpec {
        DistributionSpec {
            kind: "geometric".into(),
            p: Some(p),
            ..Default::default()
        }
    }

    #[test]
    fn config_round_trips_with_defaults() {
        let text = r#"{"kind":"completeness-profile","distribution":{"kind":"geometric","p":0.6},
            "horizon":1000,"trials":3,"master_seed":1,"output":"out"}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.thresholds, Thresholds::default());
        let again = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config(_))));
        let mut c = config(ExperimentKind::CompletenessProfile, geometric(0.6), 5, 1);
        assert!(c.validate().is_err());
        c.horizon = 100;
        c.trials = 0;
        assert!(c.validate().is_err());
        let evens = DistributionSpec {
            kind: "finite-pmf".into(),
            pmf: Some(vec![(2, 0.5), (4, 0.5)]),
            ..Default::default()
        };
        let c = config(ExperimentKind::CompletenessProfile, evens, 100, 1);
        assert!(c.validate().unwrap_err().to_string().contains("multiple of 2"));
        let mut c = config(ExperimentKind::DensityConvergence, geometric(0.3), 100, 1);
        assert!(c.validate().is_err());
        c.k = 4;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rows_are_reproducible_across_thread_counts() {
        let c = config(ExperimentKind::CompletenessProfile, geometric(0.6), 5_000, 6);
        let a = execute(&c, Some(1)).unwrap();
        let b = execute(&c, Some(3)).unwrap();
        let strip = |o: &ExperimentOutcome| -> Vec<_> {
            o.records.iter().map(|r| (r.trial_index, r.derived_seed, r.fields.clone())).collect()
        };
        assert_eq!(strip(&a), strip(&b));
        let r = replay(&c, 4).unwrap();
        assert_eq!(r.fields, a.records[4].fields);
        assert!(replay(&c, 6).is_err());
    }

    #[test]
    fn mann_suite_small() {
        let c = config(ExperimentKind::MannSuite, geometric(0.5), 60, 200);
        let o = execute(&c, None).unwrap();
        assert!(o.passed(), "{:?}", o.assertions);
        assert_eq!(o.records.len(), 200);
    }

    #[test]
    fn renewal_rows_cover_batches() {
        let mut c = config(ExperimentKind::RenewalSweep, geometric(0.5), 100, 100);
        c.window.b_max = 4;
        c.window.cap = 10_000;
        let o = execute(&c, None).unwrap();
        assert_eq!(o.records.len(), 8);
        assert_eq!(o.records[5].get("batch"), Some("1"));
        assert_eq!(o.records[5].get("b"), Some("2"));
        assert!(o.summary["range_fits"].as_array().unwrap().len() == 2);
    }
}
