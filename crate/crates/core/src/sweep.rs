//! Seeded random toy scenarios and the property sweeps run over them.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{AgentRef, Annotation, CohortOracle, ContextMonitor, OracleAgent};
use crate::decoder::{enumerate_truthful_exec, guarded_decode, tad_decode_with, DecodeOptions, EnumBudget};
use crate::error::Result;
use crate::exec::{self, Exec};
use crate::kb::{knowledge_consistent, KnowledgeBase, RuleSet, RuleSpec, Verdict};
use crate::metrics::{entropy_bound_of, restricted_entropy};
use crate::model::{ContextKind, ScoringModel};
use crate::oracle::{Certifier, FnOracle, Oracle, RuleOracle, ViolationKind};
use crate::types::{TokenId, Trace, Vocabulary};

pub const MAX_VOCAB: usize = 6;
pub const MAX_LEN: usize = 5;

/// Deterministic per-trial generator: trial `i` of `seed` is always the
/// same scenario regardless of execution order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub struct ToyScenario {
    pub vocab: Vocabulary,
    pub rules: RuleSet,
    pub kb: Arc<KnowledgeBase>,
    pub model: ScoringModel,
    pub agents: Vec<AgentRef>,
    pub max_len: usize,
}

impl ToyScenario {
    /// Table oracle over the KB's own rules.
    pub fn oracle(&self) -> RuleOracle {
        RuleOracle(self.rules.clone())
    }
}

/// Probability vector; about half the time drawn from a coarse grid so
/// that ties occur.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let coarse = rng.gen_bool(0.5);
    let mut w: Vec<f64> = (0..n)
        .map(|_| if coarse { rng.gen_range(0..=4) as f64 } else { rng.gen::<f64>() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        let i = rng.gen_range(0..n);
        w[i] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

pub fn random_toy(rng: &mut impl Rng) -> Result<ToyScenario> {
    let n = rng.gen_range(2..=MAX_VOCAB);
    let surfaces: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let vocab = Vocabulary::new(&surfaces)?;
    let pick = |rng: &mut dyn rand::RngCore| surfaces.choose(rng).expect("non-empty").clone();

    let mut specs = Vec::new();
    for _ in 0..rng.gen_range(0..=4) {
        let prefix = match rng.gen_range(0..4) {
            0 => "*".to_string(),
            1 => "".to_string(),
            2 => format!("* {}", pick(rng)),
            _ => format!("{} *", pick(rng)),
        };
        let token = if rng.gen_bool(0.2) { "*".to_string() } else { pick(rng) };
        let verdict = if rng.gen_bool(0.65) { Verdict::Deny } else { Verdict::Allow };
        specs.push(RuleSpec {
            prefix_pattern: prefix,
            token,
            verdict,
        });
    }
    let default = if rng.gen_bool(0.85) { Verdict::Allow } else { Verdict::Deny };
    let rules = RuleSet::compile(&specs, default, &vocab)?;
    let kb = Arc::new(KnowledgeBase::from_rules(rules.clone()));

    let mut contexts = vec![(Vec::new(), random_distribution(rng, n))];
    for w in vocab.ids() {
        contexts.push((vec![w], random_distribution(rng, n)));
    }
    let model = ScoringModel::new(vocab.clone(), ContextKind::Last, contexts, None, true)?;

    let topics = ["news", "sport"];
    let mut annotations: HashMap<TokenId, Annotation> = HashMap::new();
    for w in vocab.ids() {
        if !rng.gen_bool(0.4) {
            continue;
        }
        let ann = Annotation {
            entity: rng.gen_bool(0.5).then(|| "e".to_string()),
            attribute: Some(format!("v{}", rng.gen_range(0..2))),
            topic: rng.gen_bool(0.5).then(|| topics.choose(rng).expect("non-empty").to_string()),
            tense: None,
        };
        annotations.insert(w, ann);
    }
    let monitor_topic = rng.gen_bool(0.5).then(|| topics[0].to_string());
    let agents: Vec<AgentRef> = vec![
        Arc::new(OracleAgent::new("table", RuleOracle(rules.clone()), rng.gen_range(0..4) as f64 / 10.0)),
        Arc::new(ContextMonitor::new("monitor", annotations, monitor_topic, None, 0.1)),
    ];
    Ok(ToyScenario {
        vocab,
        rules,
        kb,
        model,
        agents,
        max_len: rng.gen_range(1..=MAX_LEN),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TheoremSweep {
    pub scenarios: usize,
    pub certified: usize,
    pub consistency_checks: usize,
    pub dominance_comparisons: usize,
    pub guarded_runs: usize,
    pub blind_spots: usize,
    pub violations: Vec<String>,
}

impl TheoremSweep {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn merge(mut self, other: TheoremSweep) -> TheoremSweep {
        self.scenarios += other.scenarios;
        self.certified += other.certified;
        self.consistency_checks += other.consistency_checks;
        self.dominance_comparisons += other.dominance_comparisons;
        self.guarded_runs += other.guarded_runs;
        self.blind_spots += other.blind_spots;
        self.violations.extend(other.violations);
        self
    }
}

/// Length of the longest common prefix.
fn common_prefix(a: &[TokenId], b: &[TokenId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Consistency preservation, local dominance, guarded equivalence and an
/// incompleteness blind spot for one scenario.
pub fn check_toy(scn: &ToyScenario, label: &str) -> Result<TheoremSweep> {
    let mut out = TheoremSweep {
        scenarios: 1,
        ..TheoremSweep::default()
    };
    let seq = DecodeOptions {
        caching: true,
        exec: Exec::Sequential,
    };
    let oracle = scn.oracle();
    let certifier = Certifier {
        budget: EnumBudget::default(),
        exec: Exec::Sequential,
    };
    let report = certifier.certify(&oracle, &scn.kb, &scn.vocab, scn.max_len)?;
    if report.sound != Some(true) || report.complete != Some(true) {
        out.violations.push(format!("{label}: table oracle not certified"));
        return Ok(out);
    }
    out.certified += 1;

    let x = tad_decode_with(&scn.model, &oracle, scn.max_len, &Trace::new(), seq)?;
    for k in 0..=x.trace.len() {
        out.consistency_checks += 1;
        if !knowledge_consistent(&x.trace[..k], &scn.kb) {
            out.violations.push(format!("{label}: prefix of length {k} left the KB"));
        }
    }

    let truthful = enumerate_truthful_exec(&scn.kb, &scn.vocab, scn.max_len, EnumBudget::default(), Exec::Sequential)?;
    for y in &truthful {
        let j = common_prefix(&x.trace, y);
        if j == y.len() {
            continue;
        }
        out.dominance_comparisons += 1;
        if j == x.trace.len() {
            out.violations.push(format!("{label}: decode stopped before truthful {:?}", y.as_slice()));
            continue;
        }
        let px = scn.model.sequence_prob(&x.trace[..=j])?;
        let py = scn.model.sequence_prob(&y[..=j])?;
        if px + 1e-12 < py {
            out.violations.push(format!("{label}: dominance fails at {j}: {px} < {py}"));
        }
    }

    let guarded = guarded_decode(&scn.model, &scn.agents, scn.max_len, &Trace::new(), Exec::Sequential)?;
    let cohort = CohortOracle::new(scn.agents.clone());
    let via_oracle = tad_decode_with(&scn.model, &cohort, scn.max_len, &Trace::new(), seq)?;
    out.guarded_runs += 1;
    let sets = |r: &crate::decoder::DecodeResult| r.steps.iter().map(|s| s.safe_set.clone()).collect::<Vec<_>>();
    if guarded.trace != via_oracle.trace || guarded.status != via_oracle.status || sets(&guarded) != sets(&via_oracle) {
        out.violations.push(format!("{label}: guarded decode differs from the cohort oracle"));
    }

    if let Some(y) = truthful.iter().rev().find(|y| !y.is_empty()) {
        let (p, w) = (y.take(y.len() - 1), y[y.len() - 1]);
        let hole = (p.clone(), w);
        let base = oracle.clone();
        let blind = FnOracle(move |q: &[TokenId], v: TokenId| (q != hole.0.as_slice() || v != hole.1) && base.judge(q, v));
        let r = certifier.certify(&blind, &scn.kb, &scn.vocab, scn.max_len)?;
        let flagged = r.violations(ViolationKind::Incomplete).any(|c| c.prefix == p && c.token == w);
        let decoded = tad_decode_with(&scn.model, &blind, scn.max_len - p.len(), &p, seq)?;
        if r.sound != Some(true) || !flagged || decoded.trace.first() == Some(&w) {
            out.violations.push(format!("{label}: blind spot at {:?} not exhibited", y.as_slice()));
        } else {
            out.blind_spots += 1;
        }
    }
    Ok(out)
}

pub fn theorem_sweep(seed: u64, trials: usize, exec: Exec) -> Result<TheoremSweep> {
    let parts = exec::map_range(exec, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        random_toy(&mut rng).and_then(|scn| check_toy(&scn, &format!("seed {seed} trial {i}")))
    });
    parts
        .into_iter()
        .try_fold(TheoremSweep::default(), |acc, r| r.map(|r| acc.merge(r)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EntropySweep {
    pub trials: usize,
    /// Largest `H_S - bound` seen; non-positive when the bound holds.
    pub max_slack: f64,
    pub max_cardinality_slack: f64,
    pub violations: usize,
}

/// Random distribution over up to 64 tokens and a non-empty safe subset
/// with positive mass.
pub fn random_safe_case(rng: &mut impl Rng) -> (Vec<f64>, Vec<TokenId>) {
    let n = rng.gen_range(1..=64);
    let mut probs = random_distribution(rng, n);
    if rng.gen_bool(0.2) {
        // sharply peaked
        let i = rng.gen_range(0..n);
        probs.iter_mut().for_each(|p| *p *= 1e-6);
        probs[i] += 1.0 - probs.iter().sum::<f64>();
    }
    loop {
        let safe: Vec<TokenId> = (0..n).filter(|_| rng.gen_bool(0.5)).map(TokenId::from).collect();
        if safe.iter().any(|w| probs[w.index()] > 0.0) {
            return (probs, safe);
        }
    }
}

pub fn entropy_sweep(seed: u64, trials: usize, exec: Exec) -> Result<EntropySweep> {
    let rows = exec::map_range(exec, trials, |i| -> Result<(f64, f64)> {
        let mut rng = trial_rng(seed, i as u64);
        let (probs, safe) = random_safe_case(&mut rng);
        let h = restricted_entropy(&probs, &safe)?;
        let b = entropy_bound_of(&probs, &safe)?;
        Ok((h - b.bound, h - b.cardinality))
    });
    let mut out = EntropySweep {
        trials,
        max_slack: f64::NEG_INFINITY,
        max_cardinality_slack: f64::NEG_INFINITY,
        violations: 0,
    };
    for row in rows {
        let (slack, card) = row?;
        out.max_slack = out.max_slack.max(slack);
        out.max_cardinality_slack = out.max_cardinality_slack.max(card);
        if slack > 1e-9 || card > 1e-9 {
            out.violations += 1;
        }
    }
    Ok(out)
}
