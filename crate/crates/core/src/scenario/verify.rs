//! Certificates and theorem checks for one scenario.

use serde::Serialize;

use super::Compiled;
use crate::agents::{AgentOracle, CohortOracle, Decision};
use crate::decoder::{enumerate_truthful_exec, guarded_decode, tad_decode_with, DecodeOptions, DecodeResult, EnumBudget};
use crate::error::Result;
use crate::exec::Exec;
use crate::kb::knowledge_consistent;
use crate::oracle::{Certifier, Counterexample, Oracle, OracleReport, ViolationKind};
use crate::sweep::{theorem_sweep, TheoremSweep};
use crate::types::{TokenId, Trace};

/// Counterexamples listed in full; the rest are only counted.
const SHOWN: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub max_len: usize,
    pub budget: EnumBudget,
    pub exec: Exec,
    /// Also run the randomized theorem sweep with this seed.
    pub seed: Option<u64>,
    pub trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_len: 4,
            budget: EnumBudget::default(),
            exec: Exec::default(),
            seed: None,
            trials: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CounterexampleView {
    pub prefix: Vec<String>,
    pub token: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlindSpot {
    pub prefix: Vec<String>,
    pub token: String,
    /// What decoding from `prefix` emits instead.
    pub decoded: Vec<String>,
    pub unreachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub max_len: usize,
    pub sound: bool,
    pub complete: bool,
    pub prefixes_checked: usize,
    pub counterexample_count: usize,
    pub counterexamples: Vec<CounterexampleView>,
    pub checks: Vec<CheckLine>,
    pub blind_spot: Option<BlindSpot>,
    pub sweep: Option<TheoremSweep>,
    pub passed: bool,
}

fn line(name: &'static str, status: CheckStatus, detail: impl Into<String>) -> CheckLine {
    CheckLine {
        name,
        status,
        detail: detail.into(),
    }
}

fn verdict(name: &'static str, failures: &[String], ok: impl Into<String>) -> CheckLine {
    match failures.first() {
        None => line(name, CheckStatus::Pass, ok),
        Some(first) => line(name, CheckStatus::Fail, format!("{} failure(s); first: {first}", failures.len())),
    }
}

pub fn verify_scenario(c: &Compiled, opts: &VerifyOptions) -> Result<VerifyReport> {
    let certifier = Certifier {
        budget: opts.budget,
        exec: opts.exec,
    };
    let show = |ids: &[TokenId]| c.vocab.render(ids);
    let report: OracleReport = certifier.certify(&c.oracle, &c.kb, &c.vocab, opts.max_len)?;
    let sound = report.sound == Some(true);
    let complete = report.complete == Some(true);
    let describe = |cx: &Counterexample| format!("({:?}, {})", show(&cx.prefix), c.vocab.surface(cx.token));
    let mut checks = Vec::new();
    for (name, kind) in [("soundness", ViolationKind::Unsound), ("completeness", ViolationKind::Incomplete)] {
        let bad: Vec<String> = report.violations(kind).map(describe).collect();
        checks.push(verdict(name, &bad, format!("{} prefixes up to length {}", report.prefixes_checked, opts.max_len - 1)));
    }

    let d = &c.scenario.decode;
    let dopts = DecodeOptions {
        caching: d.caching,
        exec: opts.exec,
    };
    let run = tad_decode_with(&c.model, &c.oracle, d.horizon, &c.initial, dopts)?;

    checks.push(if !sound {
        line("consistency_preservation", CheckStatus::Skipped, "oracle is not sound")
    } else if !knowledge_consistent(&c.initial, &c.kb) {
        line("consistency_preservation", CheckStatus::Skipped, "initial prefix is not knowledge-consistent")
    } else {
        let full = run.full_trace();
        let bad: Vec<String> = (0..=full.len())
            .filter(|&k| !knowledge_consistent(&full[..k], &c.kb))
            .map(|k| format!("{:?}", show(&full[..k])))
            .collect();
        verdict("consistency_preservation", &bad, format!("{} prefixes consistent", full.len() + 1))
    });

    checks.push(stepwise_dominance(c, &run)?);

    checks.push(if sound && complete {
        local_dominance(c, opts)?
    } else {
        line("local_dominance", CheckStatus::Skipped, "oracle is not both sound and complete")
    });

    if c.agents.is_empty() {
        for name in ["guarded_equivalence", "conflict_resolution", "sound_composition"] {
            checks.push(line(name, CheckStatus::Skipped, "no agents declared"));
        }
    } else {
        checks.extend(agent_checks(c, opts, &certifier)?);
    }

    let blind_spot = match report.violations(ViolationKind::Incomplete).next() {
        None => None,
        Some(cx) => {
            let horizon = d.horizon.max(1);
            let demo = tad_decode_with(&c.model, &c.oracle, horizon, &cx.prefix, dopts)?;
            let spot = BlindSpot {
                prefix: show(&cx.prefix),
                token: c.vocab.surface(cx.token).to_string(),
                decoded: show(&demo.trace),
                unreachable: demo.trace.first() != Some(&cx.token),
            };
            checks.push(line(
                "blind_spot",
                if spot.unreachable { CheckStatus::Pass } else { CheckStatus::Fail },
                format!(
                    "truthful {:?} + {} is filtered; decoding emits {:?}",
                    spot.prefix, spot.token, spot.decoded
                ),
            ));
            Some(spot)
        }
    };

    let sweep = opts.seed.map(|seed| theorem_sweep(seed, opts.trials, opts.exec)).transpose()?;
    if let Some(s) = &sweep {
        let detail = format!(
            "{} scenarios, {} dominance comparisons, {} blind spots",
            s.scenarios, s.dominance_comparisons, s.blind_spots
        );
        checks.push(verdict("randomized_theorems", &s.violations, detail));
    }
    let passed = checks.iter().all(|l| l.status != CheckStatus::Fail);
    let counterexamples = report
        .counterexamples
        .iter()
        .take(SHOWN)
        .map(|cx| CounterexampleView {
            prefix: show(&cx.prefix),
            token: c.vocab.surface(cx.token).to_string(),
            kind: cx.kind,
        })
        .collect();
    Ok(VerifyReport {
        scenario: c.scenario.name.clone(),
        max_len: opts.max_len,
        sound,
        complete,
        prefixes_checked: report.prefixes_checked,
        counterexample_count: report.counterexamples.len(),
        counterexamples,
        checks,
        blind_spot,
        sweep,
        passed,
    })
}

fn stepwise_dominance(c: &Compiled, run: &DecodeResult) -> Result<CheckLine> {
    let mut prefix = run.prefix.clone();
    let mut bad = Vec::new();
    for st in &run.steps {
        if let Some(w) = st.chosen {
            let probs = c.model.distribution(&prefix)?;
            for &v in &st.safe_set {
                if probs[v.index()] > probs[w.index()] {
                    bad.push(format!("step {}: {} beats {}", st.step, c.vocab.surface(v), c.vocab.surface(w)));
                }
            }
            prefix.push(w);
        }
    }
    Ok(verdict("stepwise_dominance", &bad, format!("{} steps", run.steps.len())))
}

fn local_dominance(c: &Compiled, opts: &VerifyOptions) -> Result<CheckLine> {
    let dopts = DecodeOptions {
        caching: true,
        exec: opts.exec,
    };
    let x = tad_decode_with(&c.model, &c.oracle, opts.max_len, &Trace::new(), dopts)?.trace;
    let truthful = enumerate_truthful_exec(&c.kb, &c.vocab, opts.max_len, opts.budget, opts.exec)?;
    let mut bad = Vec::new();
    let mut compared = 0;
    for y in &truthful {
        let j = x.iter().zip(y.iter()).take_while(|(a, b)| a == b).count();
        if j == y.len() {
            continue;
        }
        compared += 1;
        if j == x.len() {
            bad.push(format!("decode stops before {:?}", c.vocab.render(y)));
            continue;
        }
        let px = c.model.sequence_prob(&x[..=j])?;
        let py = c.model.sequence_prob(&y[..=j])?;
        if px + 1e-12 < py {
            bad.push(format!("{:?}: {px} < {py}", c.vocab.render(y)));
        }
    }
    Ok(verdict("local_dominance", &bad, format!("{compared} truthful sequences compared")))
}

fn agent_checks(c: &Compiled, opts: &VerifyOptions, certifier: &Certifier) -> Result<Vec<CheckLine>> {
    let d = &c.scenario.decode;
    let guarded = guarded_decode(&c.model, &c.agents, d.horizon, &c.initial, opts.exec)?;
    let cohort = CohortOracle::new(c.agents.clone());
    let dopts = DecodeOptions {
        caching: d.caching,
        exec: opts.exec,
    };
    let via = tad_decode_with(&c.model, &cohort, d.horizon, &c.initial, dopts)?;
    let sets = |r: &DecodeResult| r.steps.iter().map(|s| s.safe_set.clone()).collect::<Vec<_>>();
    let mut out = Vec::new();
    let same = guarded.trace == via.trace && guarded.status == via.status && sets(&guarded) == sets(&via);
    out.push(line(
        "guarded_equivalence",
        if same { CheckStatus::Pass } else { CheckStatus::Fail },
        format!("guarded {:?} vs cohort oracle {:?}", c.vocab.render(&guarded.trace), c.vocab.render(&via.trace)),
    ));

    let mut bad = Vec::new();
    for st in &guarded.steps {
        let Some([a, b]) = st.verdict_range else { continue };
        for w in c.vocab.ids() {
            let votes: Vec<_> = guarded.verdicts[a..b].iter().filter(|v| v.token == w).collect();
            let all = votes.iter().all(|v| v.decision == Decision::Accept);
            if all != st.safe_set.contains(&w) {
                bad.push(format!("step {} token {}", st.step, c.vocab.surface(w)));
            }
            if votes.iter().any(|v| v.decision != Decision::Accept && v.justification.is_empty()) {
                bad.push(format!("step {} token {}: unexplained block", st.step, c.vocab.surface(w)));
            }
        }
    }
    out.push(verdict("conflict_resolution", &bad, format!("{} steps audited", guarded.steps.len())));

    let mut unsound = Vec::new();
    for agent in &c.agents {
        let r = certifier.soundness(&AgentOracle(agent.clone()), &c.kb, &c.vocab, opts.max_len)?;
        if r.sound != Some(true) {
            unsound.push(agent.name().to_string());
        }
    }
    out.push(if unsound.is_empty() {
        let r = certifier.soundness(&cohort as &dyn Oracle, &c.kb, &c.vocab, opts.max_len)?;
        let bad: Vec<String> = r
            .violations(ViolationKind::Unsound)
            .map(|cx| format!("({:?}, {})", c.vocab.render(&cx.prefix), c.vocab.surface(cx.token)))
            .collect();
        verdict("sound_composition", &bad, "every agent sound, joint constraint sound")
    } else {
        line("sound_composition", CheckStatus::Skipped, format!("not individually sound: {}", unsound.join(", ")))
    });
    Ok(out)
}
