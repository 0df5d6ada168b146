//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit code:
//!
//! * 0: success
//! * 1: a property check found violations
//! * 2: bad flags or an invalid instance file
//! * 3: an oracle refused the instance because of its size guard

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::adalloc::sample::{random_configuration, random_strategy};
use crate::adalloc::{
    best_configuration, evaluate_strategy, greedy_allocate, revenue_rate, AdInstance, AdUtility, AllocationStrategy,
};
use crate::error::{Error, Result};
use crate::oracle::{brute_force_rewrite_opt, lp_opt_fluid};
use crate::qrewrite::sample::random_plan;
use crate::qrewrite::{evaluate_plan, greedy_rewrite, RewriteInstance, RewritePlan, RewriteUtility};
use crate::seqcore::{
    check_derivative_props, check_local_bound_continuous, check_local_bound_discrete, check_nondecreasing,
    check_submodular, CheckReport, DerivativeProbe, Sequence,
};
use crate::stochsim::{simulate_stream, StreamConfig};
use crate::{greedy_bound, rewrite_bound, TOLERANCE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

/// Longest random strategy or plan drawn by `verify`.
const VERIFY_MAX_SEGMENTS: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "seqsub", version, about = "Greedy sequence-submodular maximization: ad allocation and query rewriting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the greedy fluid allocator on an ad instance.
    Allocate(AllocateArgs),
    /// Run the nested rewrite greedy on a rewrite instance.
    Rewrite(AllocateArgs),
    /// Replay the greedy allocation against random query streams.
    Simulate(SimulateArgs),
    /// Sample-check monotonicity, submodularity and related properties.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance file (JSON).
    #[arg(long)]
    pub instance: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock duration in the report (breaks byte-identical output).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also compute the exact optimum and the achieved ratio.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Queries per trial; defaults to round(horizon).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: Option<u64>,
    /// Include every trial's revenue in the report.
    #[arg(long)]
    pub per_trial: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum CheckName {
    Mono,
    Submod,
    Deriv,
    Lemma1,
}

impl CheckName {
    fn key(self) -> &'static str {
        match self {
            CheckName::Mono => "mono",
            CheckName::Submod => "submod",
            CheckName::Deriv => "deriv",
            CheckName::Lemma1 => "lemma1",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "mono,submod,deriv,lemma1")]
    pub checks: Vec<CheckName>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace the utility with a non-monotone function (negative control).
    #[arg(long, hide = true)]
    pub plant_counterexample: bool,
}

/// Why a command stopped, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Input(Error),
    Guard(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::GuardExceeded { .. } => Failure::Guard(e),
            other => Failure::Input(other),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Guard(_) => EXIT_GUARD,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Failure::Input(e) | Failure::Guard(e) => e,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli.command, echo) {
        Ok((report, code)) => match emit(&cli.command, &report) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INPUT
            }
        },
        Err(f) => {
            eprintln!("error: {}", f.error());
            f.exit_code()
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Allocate(a) | Command::Rewrite(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Verify(a) => &a.common,
    }
}

fn emit(command: &Command, report: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match &common(command).out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

struct Loaded {
    text: String,
    digest: String,
}

fn load(path: &Path) -> Result<Loaded> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let digest = format!("sha256:{}", hex::encode(Sha256::digest(&bytes)));
    let text = String::from_utf8(bytes).map_err(|_| Error::schema("(file)", "instance file is not UTF-8"))?;
    Ok(Loaded { text, digest })
}

/// Builds the report for `command`; the exit code is 1 only for violations.
pub fn execute(command: &Command, echo: Vec<String>) -> std::result::Result<(Value, i32), Failure> {
    let started = Instant::now();
    let c = common(command);
    let loaded = load(&c.instance)?;
    let (outputs, seed, code) = match command {
        Command::Allocate(a) => (allocate(&loaded.text, a.oracle)?, None, EXIT_OK),
        Command::Rewrite(a) => (rewrite(&loaded.text, a.oracle)?, None, EXIT_OK),
        Command::Simulate(a) => (simulate(&loaded.text, a)?, Some(a.seed), EXIT_OK),
        Command::Verify(a) => {
            let (out, passed) = verify(&loaded.text, a)?;
            (out, Some(a.seed), if passed { EXIT_OK } else { EXIT_VIOLATION })
        }
    };
    let mut report = Map::new();
    report.insert("command".into(), json!(echo));
    report.insert("instance_digest".into(), json!(loaded.digest));
    report.insert("seed".into(), json!(seed));
    report.insert("outputs".into(), outputs);
    if c.timing {
        report.insert("duration_seconds".into(), json!(started.elapsed().as_secs_f64()));
    }
    Ok((Value::Object(report), code))
}

fn ratio(value: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        value / optimum
    } else {
        1.0
    }
}

fn ad_map<T: serde::Serialize>(instance: &AdInstance, values: &[T]) -> Value {
    let map: BTreeMap<&str, &T> = instance.ads().iter().map(|a| a.id.as_str()).zip(values).collect();
    json!(map)
}

fn strategy_json(instance: &AdInstance, strategy: &AllocationStrategy) -> Value {
    json!(strategy
        .segments()
        .iter()
        .map(|s| json!({ "configuration": s.action.named(instance), "duration": s.duration }))
        .collect::<Vec<_>>())
}

fn allocate(text: &str, with_oracle: bool) -> Result<Value> {
    let instance = AdInstance::from_json_str(text)?;
    let (strategy, ledger) = greedy_allocate(&instance)?;
    let mut out = Map::new();
    out.insert("utility".into(), json!(ledger.utility));
    out.insert("strategy".into(), strategy_json(&instance, &strategy));
    out.insert("configuration_changes".into(), json!(strategy.segment_count().saturating_sub(1)));
    out.insert("breakpoints".into(), json!(ledger.breakpoints));
    out.insert("spent".into(), ad_map(&instance, &ledger.spent));
    out.insert("exhausted_at".into(), ad_map(&instance, &ledger.exhausted_at));
    if with_oracle {
        let opt = lp_opt_fluid(&instance, None)?;
        let spend: BTreeMap<&str, BTreeMap<&str, f64>> = instance
            .ads()
            .iter()
            .zip(&opt.witness.spend)
            .map(|(a, row)| {
                let per_type = instance
                    .query_types()
                    .iter()
                    .zip(row)
                    .filter(|(_, z)| **z > 0.0)
                    .map(|(q, z)| (q.id.as_str(), *z))
                    .collect();
                (a.id.as_str(), per_type)
            })
            .collect();
        out.insert(
            "oracle".into(),
            json!({ "value": opt.value, "method": opt.method, "size": opt.size as u64, "spend": spend }),
        );
        out.insert("ratio".into(), json!(ratio(ledger.utility, opt.value)));
        out.insert("guarantee".into(), json!(greedy_bound(1.0)));
    }
    Ok(Value::Object(out))
}

fn rewrite(text: &str, with_oracle: bool) -> Result<Value> {
    let instance = RewriteInstance::from_json_str(text)?;
    let outcome = greedy_rewrite(&instance)?;
    let base = instance.base();
    let evaluation = evaluate_plan(&instance, &outcome.plan)?;
    let plan: Vec<Value> = outcome
        .plan
        .items()
        .iter()
        .zip(&evaluation.consumed)
        .map(|(t, consumed)| {
            json!({
                "query_type": base.query_types()[t.query_type].id,
                "rewrites": t.rewrites.iter().map(|&r| instance.rewrites()[r].id.as_str()).collect::<Vec<_>>(),
                "consumed": ad_map(base, consumed),
            })
        })
        .collect();
    let mut out = Map::new();
    out.insert("utility".into(), json!(outcome.utility));
    out.insert("plan".into(), json!(plan));
    out.insert("warnings".into(), json!(outcome.warnings));
    if with_oracle {
        let opt = brute_force_rewrite_opt(&instance)?;
        let assignment: BTreeMap<&str, Vec<&str>> = base
            .query_types()
            .iter()
            .zip(&opt.witness.rewrites)
            .map(|(q, rs)| (q.id.as_str(), rs.iter().map(|&r| instance.rewrites()[r].id.as_str()).collect()))
            .collect();
        out.insert(
            "oracle".into(),
            json!({ "value": opt.value, "method": opt.method, "size": opt.size as u64, "rewrites": assignment }),
        );
        out.insert("ratio".into(), json!(ratio(outcome.utility, opt.value)));
        out.insert("guarantee".into(), json!(rewrite_bound()));
    }
    Ok(Value::Object(out))
}

fn simulate(text: &str, args: &SimulateArgs) -> Result<Value> {
    let instance = AdInstance::from_json_str(text)?;
    let (strategy, _) = greedy_allocate(&instance)?;
    let mut config = StreamConfig::new(args.seed, args.trials as usize);
    if let Some(q) = args.queries {
        config = config.with_queries(q as usize);
    }
    let sim = simulate_stream(&instance, &strategy, &config)?;
    let gap = (sim.mean - sim.fluid).abs();
    let mut out = Map::new();
    out.insert("mean".into(), json!(sim.mean));
    out.insert("std".into(), json!(sim.std));
    out.insert("fluid".into(), json!(sim.fluid));
    out.insert("relative_gap".into(), json!(ratio(gap, sim.fluid)));
    out.insert("trials".into(), json!(sim.trials));
    out.insert("seed".into(), json!(sim.seed));
    out.insert("query_count".into(), json!(sim.query_count));
    out.insert("rng".into(), json!(sim.rng));
    if args.per_trial {
        out.insert("per_trial".into(), json!(sim.per_trial));
    }
    Ok(Value::Object(out))
}

fn report_json(report: &CheckReport) -> Value {
    let mut v = json!({
        "passed": report.passed(),
        "samples_tested": report.samples_tested,
        "violations": report.violations,
    });
    if !report.probes.is_empty() {
        v["probes"] = json!(report.probes);
    }
    v
}

fn verify(text: &str, args: &VerifyArgs) -> Result<(Value, bool)> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::schema("(file)", e.to_string()))?;
    let is_rewrite = raw.get("rewrites").is_some();
    let samples = args.samples as usize;
    let mut checks = args.checks.clone();
    checks.sort();
    checks.dedup();

    let mut results = Map::new();
    let mut skipped = Vec::new();
    if is_rewrite {
        let instance = RewriteInstance::from_json_str(text)?;
        let u = RewriteUtility { instance: &instance };
        let plan = |rng: &mut rand_chacha::ChaCha8Rng| random_plan(rng, &instance, VERIFY_MAX_SEGMENTS);
        for check in &checks {
            let report = match check {
                CheckName::Mono if args.plant_counterexample => {
                    let planted = |p: &RewritePlan| -(p.len() as f64);
                    check_nondecreasing(&planted, plan, samples, args.seed, TOLERANCE)?
                }
                CheckName::Mono => check_nondecreasing(&u, plan, samples, args.seed, TOLERANCE)?,
                CheckName::Submod => check_submodular(&u, plan, plan, samples, args.seed, TOLERANCE)?,
                CheckName::Deriv => {
                    skipped.push(check.key());
                    continue;
                }
                CheckName::Lemma1 => check_local_bound_discrete(
                    &u,
                    |rng| (plan(rng), plan(rng)),
                    |_, b: &RewritePlan| b.items().to_vec(),
                    samples,
                    args.seed,
                    TOLERANCE,
                )?,
            };
            results.insert(check.key().into(), report_json(&report));
        }
    } else {
        let instance = AdInstance::from_json_str(text)?;
        let u = AdUtility::new(&instance);
        let strategy = |rng: &mut rand_chacha::ChaCha8Rng| random_strategy(rng, &instance, VERIFY_MAX_SEGMENTS);
        for check in &checks {
            let report = match check {
                CheckName::Mono if args.plant_counterexample => {
                    let planted = |h: &AllocationStrategy| -h.length();
                    check_nondecreasing(&planted, strategy, samples, args.seed, TOLERANCE)?
                }
                CheckName::Mono => check_nondecreasing(&u, strategy, samples, args.seed, TOLERANCE)?,
                CheckName::Submod => check_submodular(&u, strategy, strategy, samples, args.seed, TOLERANCE)?,
                CheckName::Deriv => check_derivative_props(
                    &u,
                    strategy,
                    |rng| random_configuration(rng, &instance),
                    samples,
                    args.seed,
                    TOLERANCE,
                    DerivativeProbe::new(instance.horizon()),
                )?,
                CheckName::Lemma1 => check_local_bound_continuous(
                    &u,
                    |rng| (strategy(rng), strategy(rng)),
                    |a| {
                        let remaining = evaluate_strategy(&instance, a)?.remaining(&instance.budgets());
                        revenue_rate(&instance, &best_configuration(&instance, &remaining), &remaining)
                    },
                    samples,
                    args.seed,
                    TOLERANCE,
                )?,
            };
            results.insert(check.key().into(), report_json(&report));
        }
    }
    let passed = results.values().all(|r| r["passed"] == json!(true));
    let mut out = Map::new();
    out.insert("instance_kind".into(), json!(if is_rewrite { "rewrite" } else { "ad" }));
    out.insert("checks".into(), Value::Object(results));
    out.insert("skipped".into(), json!(skipped));
    out.insert("passed".into(), json!(passed));
    out.insert("samples".into(), json!(samples));
    Ok((Value::Object(out), passed))
}
