use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tad_core::decoder::{DecodeStatus, EnumBudget};
use tad_core::metrics::{benchmark_stats, BenchmarkCounts, RiskPolicy};
use tad_core::perf::{ComplexityParams, CpiParams, PipelineStages};
use tad_core::scenario::{
    bundled, bundled_names, perf_tables, run_compiled, verify_scenario, write_outputs, AmdahlCase, CheckStatus,
    ComplexityCase, CpiCase, Discrepancy, PerfReport, PerfSpec, RunReport, Scenario, VerifyOptions, VerifyReport,
};
use tad_core::{json, Error, Exec};

mod exit {
    pub const COMPLETED: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const ABSTAINED: u8 = 3;
    pub const EMPTY_SAFE_SET: u8 = 4;
    pub const BUDGET_EXHAUSTED: u8 = 5;
    pub const VERIFY_FAILED: u8 = 6;
    pub const BUDGET_EXCEEDED: u8 = 7;
    pub const GOLDEN_MISMATCH: u8 = 8;
}

const EXIT_CODES: &str = "Exit codes:
  0  decode completed / all checks passed
  1  I/O or other runtime error
  2  parse or validation error
  3  decode abstained
  4  decode stopped on an empty safe set
  5  proof search exhausted its step budget
  6  verify: at least one check failed
  7  enumeration budget exceeded (raise TAD_ENUM_BUDGET or lower --max-len)
  8  run: result differs from the scenario's expected trace/status";

/// Truth-aware decoding: run scenarios, certify oracles, compute metrics.
#[derive(Debug, Parser)]
#[command(name = "tad", version, after_help = EXIT_CODES)]
struct Cli {
    /// Disable data-parallel evaluation.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode a scenario and emit its report.
    Run(RunArgs),
    /// Certify the scenario's oracle and check the decoding theorems by enumeration.
    Verify(VerifyArgs),
    /// Benchmark accuracy, coverage and utility from outcome counts.
    Stats(StatsArgs),
    /// Evaluate the CPI, throughput, Amdahl and complexity models.
    Perf(PerfArgs),
    /// List the bundled scenarios.
    List,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Args)]
struct Source {
    /// Name of a bundled scenario.
    name: Option<String>,
    /// Path to a scenario JSON file.
    #[arg(long, value_name = "PATH", conflicts_with = "name")]
    scenario: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<Scenario, Error> {
        match (&self.scenario, &self.name) {
            (Some(path), _) => Scenario::load(path),
            (None, Some(name)) => bundled(name),
            (None, None) => Err(Error::validation(
                "scenario",
                format!(
                    "give --scenario PATH or one of: {}",
                    bundled_names().collect::<Vec<_>>().join(", ")
                ),
            )),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Write the JSON report here (and the verdict log beside it).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: Source,
    /// Longest prefix enumerated by the certificates.
    #[arg(long, default_value_t = 4)]
    max_len: usize,
    /// Also run the randomized theorem sweep with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenarios in the randomized sweep.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    total: Option<u64>,
    #[arg(long)]
    answered: Option<u64>,
    #[arg(long)]
    correct: Option<u64>,
    /// Defaults to total - answered.
    #[arg(long)]
    abstained: Option<u64>,
    #[arg(long)]
    baseline_total: Option<u64>,
    #[arg(long)]
    baseline_answered: Option<u64>,
    #[arg(long)]
    baseline_correct: Option<u64>,
    #[arg(long)]
    baseline_abstained: Option<u64>,
    /// Credit given to an abstention.
    #[arg(long, default_value_t = 0.5)]
    omega: f64,
    /// Render a method table; the first row is the baseline.
    #[arg(long)]
    table: bool,
    /// Table row as LABEL=TOTAL,ANSWERED,CORRECT[,ABSTAINED]; defaults to the reference three-row example.
    #[arg(long, value_name = "ROW")]
    row: Vec<String>,
}

#[derive(Debug, Args)]
struct PerfArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    cpi0: Option<f64>,
    #[arg(long)]
    h_kb: Option<f64>,
    #[arg(long)]
    c_hit: Option<f64>,
    #[arg(long)]
    c_miss: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    c_agents: f64,
    #[arg(long, default_value_t = 2.5e9)]
    clock_hz: f64,
    #[arg(long)]
    vocab_size: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Seconds per oracle query.
    #[arg(long)]
    oracle_cost: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    delta_avg: f64,
    #[arg(long, default_value_t = 1.0)]
    batch_factor: f64,
    /// Amdahl case as F,S; repeatable.
    #[arg(long, value_name = "F,S")]
    amdahl: Vec<String>,
    /// Stage service times as LM,FV,MR,CM.
    #[arg(long, value_name = "LM,FV,MR,CM")]
    pipeline: Option<String>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let outcome = match cli.command {
        Command::Run(a) => run(a, exec),
        Command::Verify(a) => verify(a, exec),
        Command::Stats(a) => stats(a),
        Command::Perf(a) => perf(a, exec),
        Command::List => {
            for name in bundled_names() {
                println!("{name}");
            }
            Ok(exit::COMPLETED)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Validation { .. } | Error::UnknownToken(_) => exit::INVALID,
        Error::BudgetExceeded { .. } => exit::BUDGET_EXCEEDED,
        _ => exit::OTHER,
    }
}

fn status_code(status: DecodeStatus) -> u8 {
    match status {
        DecodeStatus::Completed => exit::COMPLETED,
        DecodeStatus::Abstained => exit::ABSTAINED,
        DecodeStatus::EmptySafeSet => exit::EMPTY_SAFE_SET,
        DecodeStatus::BudgetExhausted => exit::BUDGET_EXHAUSTED,
    }
}

fn emit<T: Serialize>(value: &T) -> Result<(), Error> {
    print!("{}", json::to_string(value)?);
    Ok(())
}

fn run(a: RunArgs, exec: Exec) -> Result<u8, Error> {
    let compiled = a.source.load()?.compile()?;
    let mut outcome = run_compiled(&compiled, exec)?;
    if let Some(out) = &a.out {
        write_outputs(&mut outcome, out)?;
    }
    let report = &outcome.report;
    match (a.format, &a.out) {
        (Format::Table, _) => print!("{}", run_table(report)),
        (Format::Json, None) => emit(report)?,
        (Format::Json, Some(_)) => {}
    }
    if let Some(g) = report.golden.as_ref().filter(|g| !g.matched) {
        for m in &g.mismatches {
            eprintln!("golden mismatch: {m}");
        }
        return Ok(exit::GOLDEN_MISMATCH);
    }
    Ok(status_code(report.status))
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn run_table(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} ({:?}): {:?}", r.scenario, r.mode, r.status);
    let _ = writeln!(s, "trace    {}", [r.initial.clone(), r.trace.clone()].concat().join(" "));
    let _ = writeln!(s, "{:>4}  {:>8}  {:>10}  {:>7}  {:<10}  safe set", "step", "pi", "H_S (nat)", "delta", "chosen");
    for st in &r.steps {
        let _ = writeln!(
            s,
            "{:>4}  {:>8.4}  {:>10}  {:>7.4}  {:<10}  {{{}}}",
            st.step,
            st.safe_mass,
            opt(st.semantic_entropy.map(|h| format!("{h:.4}"))),
            st.density,
            opt(st.chosen.as_deref()),
            st.safe_set.join(", ")
        );
    }
    for ev in &r.retrieval_events {
        let _ = writeln!(
            s,
            "retrieval at step {}: {} document(s), improved={}{}",
            ev.step,
            ev.documents,
            ev.improved,
            ev.error.as_ref().map(|e| format!(", error: {e}")).unwrap_or_default()
        );
    }
    let m = &r.metrics;
    let _ = writeln!(
        s,
        "mean pi {}  mean H_S {} nats ({} bits)  mean delta {}  oracle queries {}",
        opt(m.mean_safe_mass.map(|v| format!("{v:.4}"))),
        opt(m.mean_entropy_nats.map(|v| format!("{v:.4}"))),
        opt(m.mean_entropy_bits.map(|v| format!("{v:.4}"))),
        opt(m.mean_density.map(|v| format!("{v:.4}"))),
        m.oracle_queries
    );
    if let Some(p) = &r.perf {
        s.push_str(&perf_table(p));
    }
    s.push_str(&discrepancy_table(&r.discrepancies));
    if let Some(g) = &r.golden {
        let _ = writeln!(s, "golden   {}", if g.matched { "match" } else { "MISMATCH" });
    }
    s
}

fn discrepancy_table(ds: &[Discrepancy]) -> String {
    let mut s = String::new();
    for d in ds {
        let _ = writeln!(
            s,
            "{} {:?}@{}: printed {} derived {:.6} ({})",
            if d.agrees { "agree   " } else { "DIFFERS " },
            d.quantity,
            d.at,
            d.printed,
            d.derived,
            d.source
        );
    }
    s
}

fn perf_table(p: &PerfReport) -> String {
    let mut s = String::new();
    for row in &p.cpi {
        let _ = writeln!(
            s,
            "cpi {:<12} CPI {:.4}  c_tad {:.4}  TPS {:.4e} tok/s{}",
            row.label,
            row.cpi,
            row.c_tad,
            row.throughput,
            row.speedup.map(|x| format!("  speedup {x:.3}x")).unwrap_or_default()
        );
    }
    for row in &p.complexity {
        let _ = writeln!(
            s,
            "complexity {:<8} naive {:.4} s  pruned {:.4} s  speedup {:.2}x",
            row.label, row.naive_seconds, row.pruned_seconds, row.speedup
        );
    }
    for row in &p.amdahl {
        let _ = writeln!(s, "amdahl f={} s={}  speedup {:.4}x", row.f, row.s, row.speedup);
    }
    if let Some(b) = &p.pipeline {
        let _ = writeln!(s, "pipeline bottleneck {} ({} s), throughput {:.4}/s", b.stage, b.service_time, b.throughput);
    }
    if let Some(m) = &p.measured {
        let _ = writeln!(
            s,
            "measured delta {:.4}  queries/token {:.4}  modeled CPI {:.4}",
            m.delta_avg, m.queries_per_token, m.modeled_cpi
        );
    }
    s
}

fn verify(a: VerifyArgs, exec: Exec) -> Result<u8, Error> {
    let compiled = a.source.load()?.compile()?;
    let opts = VerifyOptions {
        max_len: a.max_len,
        budget: EnumBudget::from_env()?,
        exec,
        seed: a.seed,
        trials: a.trials,
    };
    let report = verify_scenario(&compiled, &opts)?;
    match a.format {
        Format::Json => emit(&report)?,
        Format::Table => print!("{}", verify_table(&report)),
    }
    Ok(if report.passed { exit::COMPLETED } else { exit::VERIFY_FAILED })
}

fn verify_table(r: &VerifyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} (max_len {})", r.scenario, r.max_len);
    for c in &r.checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        let _ = writeln!(s, "{tag}  {:<26} {}", c.name, c.detail);
    }
    for cx in &r.counterexamples {
        let _ = writeln!(s, "  counterexample {:?}: {:?} + {}", cx.kind, cx.prefix, cx.token);
    }
    if r.counterexample_count > r.counterexamples.len() {
        let _ = writeln!(s, "  ... {} more", r.counterexample_count - r.counterexamples.len());
    }
    if let Some(b) = &r.blind_spot {
        let _ = writeln!(
            s,
            "blind spot: {:?} + {} is truthful but filtered; decoding emits {:?}",
            b.prefix, b.token, b.decoded
        );
    }
    let _ = writeln!(s, "{}", if r.passed { "all checks passed" } else { "verification FAILED" });
    s
}

const REFERENCE_ROWS: [(&str, [u64; 4]); 3] = [
    ("Baseline", [1000, 1000, 720, 0]),
    ("TAD (answer-all)", [1000, 1000, 890, 0]),
    ("TAD (abstain)", [1000, 920, 864, 80]),
];

fn counts(total: Option<u64>, answered: Option<u64>, correct: Option<u64>, abstained: Option<u64>, who: &str) -> Result<Option<BenchmarkCounts>, Error> {
    match (total, answered, correct) {
        (None, None, None) if abstained.is_none() => Ok(None),
        (Some(t), Some(a), Some(c)) => BenchmarkCounts::new(t, a, c, abstained.unwrap_or(t.saturating_sub(a))).map(Some),
        _ => Err(Error::validation(who, "needs total, answered and correct together")),
    }
}

fn parse_row(text: &str) -> Result<(String, BenchmarkCounts), Error> {
    let bad = || Error::validation("row", format!("expected LABEL=TOTAL,ANSWERED,CORRECT[,ABSTAINED], got `{text}`"));
    let (label, nums) = text.split_once('=').ok_or_else(bad)?;
    let nums = nums
        .split(',')
        .map(|n| n.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    let c = match nums[..] {
        [t, a, c] => BenchmarkCounts::new(t, a, c, t.saturating_sub(a)),
        [t, a, c, ab] => BenchmarkCounts::new(t, a, c, ab),
        _ => Err(bad()),
    }?;
    Ok((label.trim().to_string(), c))
}

fn pct(x: f64) -> String {
    let s = format!("{:.1}", x * 100.0);
    format!("{}%", s.strip_suffix(".0").unwrap_or(&s))
}

fn stats(a: StatsArgs) -> Result<u8, Error> {
    let policy = RiskPolicy::new(a.omega)?;
    let current = counts(a.total, a.answered, a.correct, a.abstained, "counts")?;
    let baseline = counts(
        a.baseline_total,
        a.baseline_answered,
        a.baseline_correct,
        a.baseline_abstained,
        "baseline",
    )?;
    if !a.table {
        let c = current.ok_or_else(|| Error::validation("counts", "give --total, --answered and --correct (or --table)"))?;
        emit(&benchmark_stats(&c, policy, baseline.as_ref())?)?;
        return Ok(exit::COMPLETED);
    }

    let rows: Vec<(String, BenchmarkCounts)> = if !a.row.is_empty() {
        a.row.iter().map(|r| parse_row(r)).collect::<Result<_, _>>()?
    } else {
        REFERENCE_ROWS
            .iter()
            .map(|(l, [t, an, c, ab])| BenchmarkCounts::new(*t, *an, *c, *ab).map(|c| (l.to_string(), c)))
            .collect::<Result<_, _>>()?
    };
    let base = rows[0].1;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>7} {:>7} {:>9} {:>8} {:>9} {:>8}",
        "Method",
        "Acc.",
        "Err.",
        "Coverage",
        format!("U(w={})", a.omega),
        "RelGain",
        "ErrRed"
    );
    for (i, (label, c)) in rows.iter().enumerate() {
        let r = benchmark_stats(c, policy, (i > 0).then_some(&base))?;
        let _ = writeln!(
            out,
            "{:<18} {:>7} {:>7} {:>9} {:>8.3} {:>9} {:>8}",
            label,
            pct(r.accuracy),
            pct(r.error),
            pct(r.coverage),
            r.utility,
            opt(r.relative_gain.map(|g| format!("{g:.3}"))),
            opt(r.error_reduction.map(|g| format!("{g:.3}")))
        );
    }
    print!("{out}");
    Ok(exit::COMPLETED)
}

#[derive(Serialize)]
struct PerfOutput {
    perf: PerfReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    discrepancies: Vec<Discrepancy>,
}

fn floats<const N: usize>(text: &str, field: &str) -> Result<[f64; N], Error> {
    let bad = || Error::validation(field, format!("expected {N} comma-separated numbers, got `{text}`"));
    let v = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    v.try_into().map_err(|_| bad())
}

fn perf(a: PerfArgs, exec: Exec) -> Result<u8, Error> {
    let output = if a.source.scenario.is_some() || a.source.name.is_some() {
        let compiled = a.source.load()?.compile()?;
        if compiled.scenario.perf.is_none() {
            return Err(Error::validation("perf", format!("scenario {} has no perf section", compiled.scenario.name)));
        }
        let report = run_compiled(&compiled, exec)?.report;
        PerfOutput {
            perf: report.perf.expect("perf section present"),
            discrepancies: report.discrepancies,
        }
    } else {
        PerfOutput {
            perf: perf_tables(&perf_spec(&a)?)?,
            discrepancies: Vec::new(),
        }
    };
    match a.format {
        Format::Json => emit(&output)?,
        Format::Table => print!("{}{}", perf_table(&output.perf), discrepancy_table(&output.discrepancies)),
    }
    Ok(exit::COMPLETED)
}

fn perf_spec(a: &PerfArgs) -> Result<PerfSpec, Error> {
    let mut spec = PerfSpec::default();
    match (a.cpi0, a.h_kb, a.c_hit, a.c_miss) {
        (None, None, None, None) => {}
        (Some(cpi0), Some(h_kb), Some(c_hit), Some(c_miss)) => spec.cpi.push(CpiCase {
            label: "flags".into(),
            params: CpiParams {
                cpi0,
                h_kb,
                c_hit,
                c_miss,
                c_agents: a.c_agents,
                clock_hz: a.clock_hz,
            },
        }),
        _ => return Err(Error::validation("cpi", "needs --cpi0, --h-kb, --c-hit and --c-miss together")),
    }
    match (a.vocab_size, a.horizon, a.oracle_cost) {
        (None, None, None) => {}
        (Some(vocab_size), Some(horizon), Some(oracle_cost)) => spec.complexity.push(ComplexityCase {
            label: "flags".into(),
            params: ComplexityParams {
                vocab_size,
                horizon,
                oracle_cost,
                delta_avg: a.delta_avg,
                batch_factor: a.batch_factor,
            },
        }),
        _ => return Err(Error::validation("complexity", "needs --vocab-size, --horizon and --oracle-cost together")),
    }
    for text in &a.amdahl {
        let [f, s] = floats::<2>(text, "amdahl")?;
        spec.amdahl.push(AmdahlCase { f, s });
    }
    if let Some(text) = &a.pipeline {
        let [lm, fv, mr, cm] = floats::<4>(text, "pipeline")?;
        spec.pipeline = Some(PipelineStages { lm, fv, mr, cm });
    }
    if spec.cpi.is_empty() && spec.complexity.is_empty() && spec.amdahl.is_empty() && spec.pipeline.is_none() {
        return Err(Error::validation("perf", "nothing to evaluate; pass --scenario or model flags"));
    }
    Ok(spec)
}
