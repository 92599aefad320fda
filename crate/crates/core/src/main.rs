use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gapcomplete::bits::BitSet;
use gapcomplete::density::{density_report, mann_check};
use gapcomplete::expctl::{self, read_manifest, ExperimentConfig, RunStatus, TrialRecord};
use gapcomplete::gapdist::{make_distribution, DistributionSpec, GapDistribution};
use gapcomplete::renewal::{estimate_meeting_mean, estimate_range_meeting_mean, MeetingEstimate};
use gapcomplete::seed::{derive_seed, rng_from_seed};
use gapcomplete::sumset::{exceptional_set, representable, RepMode, RepTable};
use gapcomplete::weights::{generate_weights_seeded, WeightSequence};
use gapcomplete::{Error, Result};

#[derive(Parser)]
#[command(name = "gapcomplete", version, about = "Completeness laboratory for integer sequences with iid gaps")]
struct Cli {
    /// Master seed for anything random.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Gap laws.
    #[command(subcommand)]
    Dist(DistCmd),
    /// Weight sequences.
    #[command(subcommand)]
    Weights(WeightsCmd),
    /// Representability tables.
    #[command(subcommand)]
    Rep(RepCmd),
    /// Schnirelmann density of a weight set.
    #[command(subcommand)]
    Density(DensityCmd),
    /// Mann's inequality on two finite sets.
    #[command(subcommand)]
    Mann(MannCmd),
    /// Delayed renewal meeting times.
    #[command(subcommand)]
    Renewal(RenewalCmd),
    /// Config-driven experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Args)]
struct DistArg {
    /// `geometric:P`, `power-tail:ALPHA[:TRUNCATION]`, `pmf:V=P,V=P,...`,
    /// inline JSON, or `@file.json`.
    #[arg(long)]
    dist: String,
}

#[derive(Subcommand)]
enum DistCmd {
    /// Moments and support structure.
    Inspect {
        #[command(flatten)]
        dist: DistArg,
        /// Search bound for the monoid analysis.
        #[arg(long, default_value_t = 1000)]
        bound: u64,
    },
}

#[derive(Subcommand)]
enum WeightsCmd {
    /// Sample gaps up to a horizon and write the gap file.
    Gen {
        #[command(flatten)]
        dist: DistArg,
        #[arg(long)]
        horizon: u64,
    },
}

#[derive(Args)]
struct TableArgs {
    /// Gap file written by `weights gen`.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value = "exact-distinct")]
    mode: RepMode,
    /// Defaults to the horizon stored in the gap file.
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Subcommand)]
enum RepCmd {
    /// Build a table and write it in the binary table format.
    Table {
        #[command(flatten)]
        table: TableArgs,
    },
    /// List non-representable integers in `[lo, hi]`.
    Exceptions {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = 1)]
        lo: u64,
        #[arg(long)]
        hi: Option<u64>,
    },
}

#[derive(Subcommand)]
enum DensityCmd {
    /// Window Schnirelmann density and `A(N)/N` of the weights.
    Report {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        horizon: Option<u64>,
    },
}

#[derive(Subcommand)]
enum MannCmd {
    /// Both sets must contain 0. Elements as `0,1,4,5` or `@file`.
    Check {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Window `[0, N]`; defaults to the largest element given.
        #[arg(long)]
        bound: Option<u64>,
    },
}

#[derive(Subcommand)]
enum RenewalCmd {
    /// Mean meeting index for `b = 1..=b_max`.
    Sweep {
        #[command(flatten)]
        dist: DistArg,
        #[arg(long, default_value_t = 50)]
        b_max: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run a JSON config; writes trials.csv and manifest.json.
    Run {
        config: PathBuf,
        /// Rerun a single row and print it instead.
        #[arg(long)]
        replay: Option<u64>,
    },
    /// Rerun one row from a manifest's config echo.
    Replay { manifest: PathBuf, trial: u64 },
}

fn parse_dist(text: &str) -> Result<GapDistribution> {
    let spec: DistributionSpec = if let Some(path) = text.strip_prefix('@') {
        serde_json::from_str(&fs::read_to_string(path)?)?
    } else if text.trim_start().starts_with('{') {
        serde_json::from_str(text)?
    } else {
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number {s:?}"))) };
        match kind {
            "geometric" => DistributionSpec {
                kind: kind.into(),
                p: Some(num(rest)?),
                ..Default::default()
            },
            "power-tail" => {
                let mut parts = rest.split(':');
                let alpha = num(parts.next().unwrap_or(""))?;
                let truncation = parts
                    .next()
                    .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad truncation {t:?}"))))
                    .transpose()?;
                DistributionSpec {
                    kind: kind.into(),
                    alpha: Some(alpha),
                    truncation,
                    ..Default::default()
                }
            }
            "pmf" => {
                let pmf = rest
                    .split(',')
                    .map(|pair| {
                        let (v, p) = pair
                            .split_once('=')
                            .ok_or_else(|| Error::Parse(format!("expected V=P, got {pair:?}")))?;
                        let v = v.trim().parse().map_err(|_| Error::Parse(format!("bad value {v:?}")))?;
                        Ok((v, num(p.trim())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DistributionSpec {
                    kind: "finite-pmf".into(),
                    pmf: Some(pmf),
                    ..Default::default()
                }
            }
            _ => return Err(Error::Parse(format!("unknown distribution {text:?}"))),
        }
    };
    make_distribution(&spec)
}

fn parse_set(text: &str) -> Result<Vec<u64>> {
    let owned;
    let body = match text.strip_prefix('@') {
        Some(path) => {
            owned = fs::read_to_string(path)?;
            owned.as_str()
        }
        None => text,
    };
    body.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad integer {s:?}"))))
        .collect()
}

fn read_weights(path: &Path) -> Result<WeightSequence> {
    WeightSequence::read_from(BufReader::new(fs::File::open(path)?))
}

struct Ctx {
    seed: u64,
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: Format,
}

impl Ctx {
    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// Rows as CSV or a JSON array, per `--format`.
    fn emit<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        let mut sink = self.sink()?;
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut sink, rows)?;
                writeln!(sink)?;
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(sink);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }

    fn emit_records(&self, records: &[TrialRecord]) -> Result<()> {
        let mut sink = self.sink()?;
        match self.format {
            Format::Csv => expctl::write_records(records, sink),
            Format::Json => {
                let rows: Vec<_> = records
                    .iter()
                    .map(|r| {
                        let mut m = serde_json::Map::new();
                        m.insert("trial_index".into(), json!(r.trial_index));
                        m.insert("derived_seed".into(), json!(r.derived_seed));
                        for (k, v) in &r.fields {
                            m.insert(k.clone(), json!(v));
                        }
                        m.insert("wall_clock_ms".into(), json!(r.wall_clock_ms));
                        m
                    })
                    .collect();
                serde_json::to_writer_pretty(&mut sink, &rows)?;
                writeln!(sink)?;
                Ok(())
            }
        }
    }
}

#[derive(Serialize)]
struct SweepRow {
    b: u64,
    trials: usize,
    mean_index: f64,
    half_width_95: f64,
    censored_fraction: f64,
    cap: u64,
    seed: u64,
    range_mean_index: f64,
    range_half_width_95: f64,
}

#[derive(Serialize)]
struct ExceptionRow {
    n: u64,
}

fn build_table(args: &TableArgs) -> Result<(WeightSequence, RepTable)> {
    let seq = read_weights(&args.weights)?;
    let horizon = args.horizon.unwrap_or(seq.horizon());
    let table = representable(seq.weights(), args.k, horizon, args.mode)?;
    Ok((seq, table))
}

fn censored_as_cap(b: u64, trials: usize, cap: u64) -> impl Fn(Error) -> Result<MeetingEstimate> {
    move |e| match e {
        Error::AllCensored(_) => Ok(MeetingEstimate {
            b,
            trials,
            mean_index: cap as f64,
            half_width_95: 0.0,
            censored_fraction: 1.0,
            cap,
            valid: false,
        }),
        e => Err(e),
    }
}

fn run(cli: Cli) -> Result<RunStatus> {
    let ctx = Ctx {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
        format: cli.format,
    };
    if let Some(n) = ctx.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Dist(DistCmd::Inspect { dist, bound }) => {
            let d = parse_dist(&dist.dist)?;
            let moments: Vec<_> = [0.5, 1.0, 1.5, 2.0]
                .iter()
                .map(|&r| {
                    let m = d.moment(r);
                    json!({"order": r, "value": m.value.finite(), "finite": m.value.is_finite(), "method": m.method})
                })
                .collect();
            let support = d.support_analysis(bound)?;
            let report = json!({
                "label": d.label(),
                "spec": d.spec(),
                "moments": moments,
                "support_gcd": d.support_gcd(),
                "x0": support.x0,
                "x_prime": support.x_prime,
                "analysis_bound": bound,
            });
            let mut sink = ctx.sink()?;
            serde_json::to_writer_pretty(&mut sink, &report)?;
            writeln!(sink)?;
        }
        Command::Weights(WeightsCmd::Gen { dist, horizon }) => {
            let d = parse_dist(&dist.dist)?;
            if horizon == 0 {
                return Err(Error::InvalidArgument("horizon must be positive".into()));
            }
            generate_weights_seeded(&d, horizon, ctx.seed).write_to(ctx.sink()?)?;
        }
        Command::Rep(RepCmd::Table { table }) => {
            let (_, t) = build_table(&table)?;
            let path = ctx
                .out
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("rep table needs --out".into()))?;
            t.write_to(io::BufWriter::new(fs::File::create(path)?))?;
            eprintln!(
                "{} representable of {} (mode {:?}, k = {}, source {})",
                t.representable().count(),
                t.horizon() + 1,
                t.mode(),
                t.k(),
                t.digest_hex()
            );
        }
        Command::Rep(RepCmd::Exceptions { table, lo, hi }) => {
            let (_, t) = build_table(&table)?;
            let ex = exceptional_set(&t, lo, hi.unwrap_or(t.horizon()))?;
            let rows: Vec<ExceptionRow> = ex.values.iter().map(|&n| ExceptionRow { n }).collect();
            ctx.emit(&rows)?;
        }
        Command::Density(DensityCmd::Report { weights, horizon }) => {
            let seq = read_weights(&weights)?;
            let n = horizon.unwrap_or(seq.horizon());
            let set = BitSet::from_indices(n as usize + 1, seq.weights().iter().map(|&w| w as usize));
            let report = density_report(&set)?;
            ctx.emit(&[report.row("weights")])?;
        }
        Command::Mann(MannCmd::Check { a, b, bound }) => {
            let (a, b) = (parse_set(&a)?, parse_set(&b)?);
            let n = bound.unwrap_or_else(|| a.iter().chain(&b).copied().max().unwrap_or(0));
            let to_bits = |v: &[u64]| BitSet::from_indices(n as usize + 1, v.iter().map(|&x| x as usize));
            let report = mann_check(&to_bits(&a), &to_bits(&b))?;
            ctx.emit(&report.rows("mann"))?;
            eprintln!(
                "window_complete={} first_missing={:?} inequality_holds={}",
                report.window_complete, report.first_missing, report.inequality_holds
            );
            if !report.inequality_holds {
                return Ok(RunStatus::AssertionFailed);
            }
        }
        Command::Renewal(RenewalCmd::Sweep {
            dist,
            b_max,
            trials,
            cap,
        }) => {
            let d = parse_dist(&dist.dist)?;
            let mut rows = Vec::new();
            for b in 1..=b_max {
                let seed = derive_seed(ctx.seed, b);
                let mut rng = rng_from_seed(seed);
                let e = estimate_meeting_mean(&d, b, trials, cap, &mut rng)
                    .or_else(censored_as_cap(b, trials, cap))?;
                let r = estimate_range_meeting_mean(&d, b, trials, cap, &mut rng)
                    .or_else(censored_as_cap(b, trials, cap))?;
                rows.push(SweepRow {
                    b,
                    trials,
                    mean_index: e.mean_index,
                    half_width_95: e.half_width_95,
                    censored_fraction: e.censored_fraction,
                    cap,
                    seed,
                    range_mean_index: r.mean_index,
                    range_half_width_95: r.half_width_95,
                });
            }
            ctx.emit(&rows)?;
        }
        Command::Experiment(ExperimentCmd::Run { config, replay }) => {
            if let Some(trial) = replay {
                let c = ExperimentConfig::load(&config)?;
                ctx.emit_records(&[expctl::replay(&c, trial)?])?;
                return Ok(RunStatus::Passed);
            }
            let (status, outcome) = expctl::run_experiment(&config, ctx.out.as_deref(), ctx.threads);
            match outcome {
                Ok(o) => {
                    for a in &o.assertions {
                        eprintln!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
                    }
                }
                Err(e) => eprintln!("error: {e}"),
            }
            return Ok(status);
        }
        Command::Experiment(ExperimentCmd::Replay { manifest, trial }) => {
            let m = read_manifest(&manifest)?;
            ctx.emit_records(&[expctl::replay(&m.config, trial)?])?;
        }
    }
    Ok(RunStatus::Passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RunStatus::of_error(&e).code() as u8)
        }
    }
}
