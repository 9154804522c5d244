//! Oracle-guarded greedy decoding.
//!
//! Every decoder runs the same step: compute the safe set for the current
//! prefix, record its mass, entropy and density, then append the most
//! probable safe token (lowest id on ties). They differ only in where the
//! safe set comes from and what happens when it is empty or too light.

mod abstain;
mod enumerate;
mod proof;
mod retriever;

pub use abstain::{tad_decode_abstain, AbstainParams};
pub use enumerate::{enumerate_truthful, enumerate_truthful_exec, EnumBudget};
pub use proof::{generate_proof, Goal};
pub use retriever::{NullRetriever, Retriever, ScriptStep, ScriptedRetriever};

use serde::{Deserialize, Serialize};

use crate::agents::{agent_costs, gamma, replay_states, update_states, AgentRef, AgentVerdict};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::{density_of, mass_of, restricted_entropy};
use crate::model::ScoringModel;
use crate::oracle::{Oracle, SafeSetEngine};
use crate::types::{Fact, TokenId, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Completed,
    EmptySafeSet,
    Abstained,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub step: usize,
    pub safe_set: Vec<TokenId>,
    pub safe_set_size: usize,
    pub safe_mass: f64,
    /// `None` when the safe mass is zero.
    pub semantic_entropy: Option<f64>,
    pub density: f64,
    pub chosen: Option<TokenId>,
    pub oracle_queries: u64,
    /// Half-open range into [`DecodeResult::verdicts`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_range: Option<[usize; 2]>,
    /// Per-agent cost of checking the chosen token.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalEvent {
    pub step: usize,
    pub documents: usize,
    pub improved: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Initial prefix the decode started from.
    pub prefix: Trace,
    /// Emitted tokens, one per step with a chosen token.
    pub trace: Trace,
    pub status: DecodeStatus,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrieval_events: Vec<RetrievalEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<AgentVerdict>,
    /// Facts folded into the oracle's view by retrieval, in arrival order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrieved_facts: Vec<Fact>,
}

impl DecodeResult {
    fn start(prefix: Trace) -> Self {
        DecodeResult {
            prefix,
            trace: Trace::new(),
            status: DecodeStatus::Completed,
            steps: Vec::new(),
            retrieval_events: Vec::new(),
            verdicts: Vec::new(),
            retrieved_facts: Vec::new(),
        }
    }

    /// Initial prefix followed by the emitted tokens.
    pub fn full_trace(&self) -> Trace {
        self.prefix.iter().chain(self.trace.iter()).copied().collect()
    }

    /// Unweighted mean safe mass over steps with a non-empty safe set.
    pub fn mean_safe_mass(&self) -> Option<f64> {
        mean(self.steps.iter().filter(|s| s.safe_set_size > 0).map(|s| s.safe_mass))
    }

    pub fn mean_entropy(&self) -> Option<f64> {
        mean(self.steps.iter().filter_map(|s| s.semantic_entropy))
    }

    pub fn mean_density(&self) -> Option<f64> {
        mean(self.steps.iter().map(|s| s.density))
    }
}

pub(crate) fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Structural pre-filtering and memoized oracle queries.
    pub caching: bool,
    pub exec: Exec,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            caching: true,
            exec: Exec::default(),
        }
    }
}

/// Most probable token of `safe`, lowest id among ties.
pub fn greedy_select(model: &ScoringModel, safe: &[TokenId], prefix: &[TokenId]) -> Result<TokenId> {
    let probs = model.distribution(prefix)?;
    let mut best: Option<(TokenId, f64)> = None;
    for &w in safe {
        let p = *probs.get(w.index()).ok_or_else(|| Error::UnknownToken(w.to_string()))?;
        best = match best {
            Some((b, bp)) if bp > p || (bp == p && b < w) => Some((b, bp)),
            _ => Some((w, p)),
        };
    }
    best.map(|(w, _)| w).ok_or(Error::EmptySafeSet)
}

/// Metrics for one evaluated safe set, no token chosen yet.
pub(crate) fn record(
    model: &ScoringModel,
    step: usize,
    prefix: &[TokenId],
    safe: Vec<TokenId>,
    queries: u64,
) -> Result<StepRecord> {
    let raw = model.distribution(prefix)?;
    // Metrics read scores as a distribution over V.
    let scaled;
    let probs = if model.is_normalized() {
        raw
    } else {
        let total: f64 = raw.iter().sum();
        scaled = raw.iter().map(|p| if total > 0.0 { p / total } else { 0.0 }).collect::<Vec<_>>();
        &scaled[..]
    };
    let vocab_len = model.vocabulary().len();
    Ok(StepRecord {
        step,
        safe_set_size: safe.len(),
        safe_mass: mass_of(probs, &safe),
        semantic_entropy: restricted_entropy(probs, &safe).ok(),
        density: density_of(safe.len(), vocab_len),
        safe_set: safe,
        chosen: None,
        oracle_queries: queries,
        verdict_range: None,
        agent_costs: Vec::new(),
    })
}

/// Truth-aware decoding: greedy selection restricted to the oracle's safe
/// set, stopping early on an empty safe set.
pub fn tad_decode(model: &ScoringModel, oracle: &dyn Oracle, horizon: usize, initial: &Trace) -> Result<DecodeResult> {
    tad_decode_with(model, oracle, horizon, initial, DecodeOptions::default())
}

pub fn tad_decode_with(
    model: &ScoringModel,
    oracle: &dyn Oracle,
    horizon: usize,
    initial: &Trace,
    opts: DecodeOptions,
) -> Result<DecodeResult> {
    let engine = SafeSetEngine::new(oracle, model.vocabulary().len(), opts.caching, opts.exec);
    let no_facts: &[Fact] = &[];
    let mut out = DecodeResult::start(initial.clone());
    let mut x = initial.clone();
    for t in 1..=horizon {
        let eval = engine.evaluate(no_facts, &x);
        let mut rec = record(model, t, &x, eval.safe, eval.queries)?;
        if rec.safe_set.is_empty() {
            out.steps.push(rec);
            out.status = DecodeStatus::EmptySafeSet;
            return Ok(out);
        }
        let w = greedy_select(model, &rec.safe_set, &x)?;
        rec.chosen = Some(w);
        out.steps.push(rec);
        x.push(w);
        out.trace.push(w);
    }
    Ok(out)
}

/// Multi-agent guarded decoding: the safe set is the cohort's joint
/// constraint, and agent states advance after every emission.
pub fn guarded_decode(
    model: &ScoringModel,
    agents: &[AgentRef],
    horizon: usize,
    initial: &Trace,
    exec: Exec,
) -> Result<DecodeResult> {
    let vocab_len = model.vocabulary().len();
    let mut states = replay_states(agents, initial);
    let mut out = DecodeResult::start(initial.clone());
    let mut x = initial.clone();
    for t in 1..=horizon {
        let g = gamma(agents, &states, &x, vocab_len, exec);
        let from = out.verdicts.len();
        out.verdicts.extend(g.verdicts);
        let mut rec = record(model, t, &x, g.safe, (vocab_len * agents.len()) as u64)?;
        rec.verdict_range = Some([from, out.verdicts.len()]);
        if rec.safe_set.is_empty() {
            out.steps.push(rec);
            out.status = DecodeStatus::EmptySafeSet;
            return Ok(out);
        }
        let w = greedy_select(model, &rec.safe_set, &x)?;
        rec.chosen = Some(w);
        rec.agent_costs = agent_costs(agents, &states, &x, w);
        states = update_states(agents, &states, &x, w);
        out.steps.push(rec);
        x.push(w);
        out.trace.push(w);
    }
    Ok(out)
}
