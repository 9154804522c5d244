//! Executing a scenario and assembling its report.

use std::path::Path;

use serde::Serialize;

use super::{Compiled, Mode, PerfSpec, Quantity, Scenario};
use crate::agents::Decision;
use crate::decoder::{
    generate_proof, guarded_decode, tad_decode_abstain, tad_decode_with, AbstainParams, DecodeOptions, DecodeResult,
    DecodeStatus, RetrievalEvent,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kb::knowledge_consistent_with;
use crate::metrics::{risk, RiskPolicy};
use crate::perf::{amdahl, c_tad, complexity_estimate, cpi, measured_profile, pipeline_bottleneck, throughput, Bottleneck, MeasuredProfile};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepView {
    pub step: usize,
    pub safe_set: Vec<String>,
    pub safe_set_size: usize,
    pub safe_mass: f64,
    pub semantic_entropy: Option<f64>,
    pub density: f64,
    pub chosen: Option<String>,
    pub oracle_queries: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub agent_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    /// Mean over steps with a non-empty safe set.
    pub mean_safe_mass: Option<f64>,
    pub mean_entropy_nats: Option<f64>,
    pub mean_entropy_bits: Option<f64>,
    pub mean_density: Option<f64>,
    pub omega: f64,
    /// Risk after each step, judged on the prefix that step leaves behind.
    pub risk: Vec<f64>,
    pub oracle_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpiRow {
    pub label: String,
    pub cpi: f64,
    pub c_tad: f64,
    pub throughput: f64,
    /// Throughput ratio over the previous row.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub label: String,
    pub naive_seconds: f64,
    pub pruned_seconds: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmdahlRow {
    pub f: f64,
    pub s: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub cpi: Vec<CpiRow>,
    pub complexity: Vec<ComplexityRow>,
    pub amdahl: Vec<AmdahlRow>,
    pub pipeline: Option<Bottleneck>,
    pub measured: Option<MeasuredProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub quantity: Quantity,
    pub at: usize,
    pub printed: f64,
    pub derived: f64,
    pub difference: f64,
    pub agrees: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub matched: bool,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub status: DecodeStatus,
    pub initial: Vec<String>,
    pub trace: Vec<String>,
    pub steps: Vec<StepView>,
    pub retrieval_events: Vec<RetrievalEvent>,
    pub metrics: MetricsSummary,
    pub perf: Option<PerfReport>,
    /// File name of the verdict log, relative to the report.
    pub verdict_log: Option<String>,
    pub discrepancies: Vec<Discrepancy>,
    pub golden: Option<GoldenCheck>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictLine {
    pub step: usize,
    pub agent: String,
    pub token: String,
    pub decision: Decision,
    pub justification: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub result: DecodeResult,
    pub verdicts: Vec<VerdictLine>,
}

pub fn run_scenario(path: &Path, exec: Exec) -> Result<RunOutcome> {
    let scenario = Scenario::load(path)?;
    run_compiled(&scenario.compile()?, exec)
}

/// Run the configured decoder and derive every report section.
pub fn run_compiled(c: &Compiled, exec: Exec) -> Result<RunOutcome> {
    let d = &c.scenario.decode;
    let opts = DecodeOptions {
        caching: d.caching,
        exec,
    };
    let result = match d.mode {
        Mode::Tad => tad_decode_with(&c.model, &c.oracle, d.horizon, &c.initial, opts)?,
        Mode::Guarded => guarded_decode(&c.model, &c.agents, d.horizon, &c.initial, exec)?,
        Mode::Abstain => {
            let params = AbstainParams {
                tau: d.tau,
                retry_budget: d.retry_budget,
            };
            tad_decode_abstain(&c.model, &c.oracle, d.horizon, &c.initial, params, &mut c.retriever(), opts)?
        }
        Mode::Proof => {
            let goal = c.goal.as_ref().ok_or_else(|| Error::validation("goal", "missing"))?;
            generate_proof(&c.vocab, &c.oracle, &c.model, goal, d.horizon, opts)?
        }
    };
    let report = build_report(c, &result)?;
    let verdicts = verdict_lines(c, &result);
    Ok(RunOutcome {
        report,
        result,
        verdicts,
    })
}

fn verdict_lines(c: &Compiled, r: &DecodeResult) -> Vec<VerdictLine> {
    r.steps
        .iter()
        .filter_map(|s| s.verdict_range.map(|[a, b]| (s.step, a, b)))
        .flat_map(|(step, a, b)| {
            r.verdicts[a..b].iter().map(move |v| VerdictLine {
                step,
                agent: v.agent.clone(),
                token: c.vocab.surface(v.token).to_string(),
                decision: v.decision,
                justification: v.justification.clone(),
            })
        })
        .collect()
}

fn build_report(c: &Compiled, r: &DecodeResult) -> Result<RunReport> {
    let s = &c.scenario;
    let render = |ids: &[crate::TokenId]| c.vocab.render(ids);
    let steps: Vec<StepView> = r
        .steps
        .iter()
        .map(|st| StepView {
            step: st.step,
            safe_set: render(&st.safe_set),
            safe_set_size: st.safe_set_size,
            safe_mass: st.safe_mass,
            semantic_entropy: st.semantic_entropy,
            density: st.density,
            chosen: st.chosen.map(|w| c.vocab.surface(w).to_string()),
            oracle_queries: st.oracle_queries,
            agent_costs: st.agent_costs.clone(),
        })
        .collect();

    let policy = RiskPolicy::new(s.decode.omega)?;
    let mut prefix = r.prefix.clone();
    let mut risks = Vec::with_capacity(r.steps.len());
    for st in &r.steps {
        if let Some(w) = st.chosen {
            prefix.push(w);
        }
        let consistent = knowledge_consistent_with(&prefix, &c.kb, &r.retrieved_facts);
        risks.push(risk(consistent, st.safe_mass, policy));
    }
    let mean_entropy = r.mean_entropy();
    let metrics = MetricsSummary {
        mean_safe_mass: r.mean_safe_mass(),
        mean_entropy_nats: mean_entropy,
        mean_entropy_bits: mean_entropy.map(|h| h / std::f64::consts::LN_2),
        mean_density: r.mean_density(),
        omega: s.decode.omega,
        risk: risks,
        oracle_queries: r.steps.iter().map(|st| st.oracle_queries).sum(),
    };

    let perf = s.perf.as_ref().map(|p| perf_report(c, p, r)).transpose()?;
    let discrepancies = discrepancies(c, r, perf.as_ref())?;
    let golden = s.expected.as_ref().map(|e| {
        let mut mismatches = Vec::new();
        if let Some(t) = &e.trace {
            let got = render(&r.trace);
            if *t != got {
                mismatches.push(format!("trace: expected {t:?}, got {got:?}"));
            }
        }
        if let Some(st) = e.status {
            if st != r.status {
                mismatches.push(format!("status: expected {st:?}, got {:?}", r.status));
            }
        }
        GoldenCheck {
            matched: mismatches.is_empty(),
            mismatches,
        }
    });
    Ok(RunReport {
        scenario: s.name.clone(),
        mode: s.decode.mode,
        status: r.status,
        initial: render(&r.prefix),
        trace: render(&r.trace),
        steps,
        retrieval_events: r.retrieval_events.clone(),
        metrics,
        perf,
        verdict_log: None,
        discrepancies,
        golden,
    })
}

fn perf_report(c: &Compiled, p: &PerfSpec, r: &DecodeResult) -> Result<PerfReport> {
    let mut report = perf_tables(p)?;
    report.measured = p
        .measured
        .as_ref()
        .map(|base| measured_profile(std::slice::from_ref(r), c.vocab.len(), base))
        .transpose()?;
    Ok(report)
}

/// Evaluate the analytic cases of a perf section; `measured` is left empty.
pub fn perf_tables(p: &PerfSpec) -> Result<PerfReport> {
    p.validate()?;
    let mut rows: Vec<CpiRow> = Vec::new();
    for case in &p.cpi {
        let tps = throughput(&case.params)?;
        let speedup = rows.last().map(|prev| tps / prev.throughput);
        rows.push(CpiRow {
            label: case.label.clone(),
            cpi: cpi(&case.params),
            c_tad: c_tad(&case.params),
            throughput: tps,
            speedup,
        });
    }
    let complexity = p
        .complexity
        .iter()
        .map(|case| {
            let e = complexity_estimate(&case.params);
            ComplexityRow {
                label: case.label.clone(),
                naive_seconds: e.naive_seconds,
                pruned_seconds: e.pruned_seconds,
                speedup: e.speedup,
            }
        })
        .collect();
    let amdahl_rows = p
        .amdahl
        .iter()
        .map(|a| AmdahlRow {
            f: a.f,
            s: a.s,
            speedup: amdahl(a.f, a.s),
        })
        .collect();
    let pipeline = p.pipeline.as_ref().map(pipeline_bottleneck).transpose()?;
    Ok(PerfReport {
        cpi: rows,
        complexity,
        amdahl: amdahl_rows,
        pipeline,
        measured: None,
    })
}


fn discrepancies(c: &Compiled, r: &DecodeResult, perf: Option<&PerfReport>) -> Result<Vec<Discrepancy>> {
    let mut out = Vec::new();
    for (i, reference) in c.scenario.references.iter().enumerate() {
        let at = reference.at;
        let step = || r.steps.iter().find(|s| s.step == at);
        let derived = match reference.quantity {
            Quantity::SafeMass => step().map(|s| s.safe_mass),
            Quantity::SemanticEntropy => step().and_then(|s| s.semantic_entropy),
            Quantity::Density => step().map(|s| s.density),
            Quantity::Cpi => perf.and_then(|p| p.cpi.get(at)).map(|row| row.cpi),
            Quantity::Throughput => perf.and_then(|p| p.cpi.get(at)).map(|row| row.throughput),
            Quantity::Amdahl => perf.and_then(|p| p.amdahl.get(at)).map(|row| row.speedup),
            Quantity::ComplexityNaive => perf.and_then(|p| p.complexity.get(at)).map(|row| row.naive_seconds),
            Quantity::ComplexityPruned => perf.and_then(|p| p.complexity.get(at)).map(|row| row.pruned_seconds),
            Quantity::ComplexitySpeedup => perf.and_then(|p| p.complexity.get(at)).map(|row| row.speedup),
        };
        let derived = derived.ok_or_else(|| {
            Error::validation(format!("references[{i}].at"), format!("no {:?} value at {at}", reference.quantity))
        })?;
        let difference = derived - reference.printed;
        out.push(Discrepancy {
            quantity: reference.quantity,
            at,
            printed: reference.printed,
            derived,
            difference,
            agrees: difference.abs() <= reference.tolerance,
            source: reference.source.clone(),
        });
    }
    Ok(out)
}

/// Write the report to `out` and, when agents voted, the verdict log next
/// to it as JSON lines.
pub fn write_outputs(outcome: &mut RunOutcome, out: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", out.display()));
    if !outcome.verdicts.is_empty() {
        let log = out.with_extension("verdicts.jsonl");
        let mut text = String::new();
        for v in &outcome.verdicts {
            text.push_str(&crate::json::to_line(v)?);
            text.push('\n');
        }
        std::fs::write(&log, text).map_err(io)?;
        outcome.report.verdict_log = log.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    std::fs::write(out, crate::json::to_string(&outcome.report)?).map_err(io)
}
