//! Proof search as truth-aware decoding over a rule vocabulary.

use std::fmt;
use std::sync::Arc;

use super::{greedy_select, record, DecodeOptions, DecodeResult, DecodeStatus};
use crate::error::Result;
use crate::kb::Pattern;
use crate::model::ScoringModel;
use crate::oracle::{Oracle, SafeSetEngine};
use crate::types::{Fact, TokenId, Trace, Vocabulary};

pub type ProofPredicate = Arc<dyn Fn(&[TokenId]) -> bool + Send + Sync>;

/// Decidable "this rule sequence proves the conjecture" predicate.
#[derive(Clone)]
pub enum Goal {
    /// The proof matches a glob over rule names.
    Pattern(Pattern<TokenId>),
    Predicate(ProofPredicate),
}

impl fmt::Debug for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Pattern(p) => f.debug_tuple("Pattern").field(p).finish(),
            Goal::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

impl Goal {
    pub fn parse(pattern: &str, rules: &Vocabulary) -> Result<Self> {
        Pattern::parse(pattern, |s| rules.id(s)).map(Goal::Pattern)
    }

    pub fn predicate(f: impl Fn(&[TokenId]) -> bool + Send + Sync + 'static) -> Self {
        Goal::Predicate(Arc::new(f))
    }

    pub fn proves(&self, proof: &[TokenId]) -> bool {
        match self {
            Goal::Pattern(p) => p.matches(proof),
            Goal::Predicate(f) => f(proof),
        }
    }
}

/// Extend the proof with the most plausible oracle-approved rule until the
/// goal is proved, no rule is approved, or `max_steps` rules were applied.
pub fn generate_proof(
    rules: &Vocabulary,
    math_oracle: &dyn Oracle,
    model: &ScoringModel,
    goal: &Goal,
    max_steps: usize,
    opts: DecodeOptions,
) -> Result<DecodeResult> {
    let engine = SafeSetEngine::new(math_oracle, rules.len(), opts.caching, opts.exec);
    let no_facts: &[Fact] = &[];
    let mut out = DecodeResult::start(Trace::new());
    let mut proof = Trace::new();
    for t in 1.. {
        if goal.proves(&proof) {
            out.status = DecodeStatus::Completed;
            return Ok(out);
        }
        if t > max_steps {
            out.status = DecodeStatus::BudgetExhausted;
            return Ok(out);
        }
        let eval = engine.evaluate(no_facts, &proof);
        let mut rec = record(model, t, &proof, eval.safe, eval.queries)?;
        if rec.safe_set.is_empty() {
            out.steps.push(rec);
            out.status = DecodeStatus::Abstained;
            return Ok(out);
        }
        let w = greedy_select(model, &rec.safe_set, &proof)?;
        rec.chosen = Some(w);
        out.steps.push(rec);
        proof.push(w);
        out.trace.push(w);
    }
    unreachable!("loop returns once t exceeds max_steps")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{RuleSet, RuleSpec, Verdict};
    use crate::oracle::{ConstOracle, RuleOracle};

    fn calculus() -> (Vocabulary, RuleOracle, ScoringModel, Goal) {
        let v = Vocabulary::new(["r1", "r2", "r3"]).unwrap();
        // r1 opens, r2 only after r1, r3 never applies
        let rules = RuleSet::compile(
            &[
                RuleSpec::new("", "r1", Verdict::Allow),
                RuleSpec::new("r1", "r2", Verdict::Allow),
            ],
            Verdict::Deny,
            &v,
        )
        .unwrap();
        let m = ScoringModel::constant(v.clone(), vec![0.2, 0.3, 0.5], true).unwrap();
        let goal = Goal::parse("r1 r2", &v).unwrap();
        (v, RuleOracle(rules), m, goal)
    }

    #[test]
    fn finds_unique_derivation() {
        let (v, o, m, goal) = calculus();
        let r = generate_proof(&v, &o, &m, &goal, 5, DecodeOptions::default()).unwrap();
        assert_eq!(r.status, DecodeStatus::Completed);
        assert_eq!(v.render(&r.trace), ["r1", "r2"]);
        // exhaustive search agrees
        let mut found = Vec::new();
        for len in 0..=3u32 {
            for code in 0..3u32.pow(len) {
                let seq: Vec<TokenId> = (0..len).map(|i| TokenId(code / 3u32.pow(i) % 3)).collect();
                let valid = (0..seq.len()).all(|i| o.judge(&seq[..i], seq[i]));
                if valid && goal.proves(&seq) {
                    found.push(seq);
                }
            }
        }
        assert_eq!(found, vec![r.trace.into_vec()]);
    }

    #[test]
    fn trivial_and_blocked_and_exhausted() {
        let (v, o, m, _) = calculus();
        let empty_goal = Goal::predicate(|_| true);
        let r = generate_proof(&v, &o, &m, &empty_goal, 5, DecodeOptions::default()).unwrap();
        assert_eq!(r.status, DecodeStatus::Completed);
        assert!(r.trace.is_empty() && r.steps.is_empty());

        let never = Goal::predicate(|_| false);
        let r = generate_proof(&v, &ConstOracle(false), &m, &never, 5, DecodeOptions::default()).unwrap();
        assert_eq!(r.status, DecodeStatus::Abstained);

        let r = generate_proof(&v, &ConstOracle(true), &m, &never, 4, DecodeOptions::default()).unwrap();
        assert_eq!(r.status, DecodeStatus::BudgetExhausted);
        assert_eq!(r.trace.len(), 4);
    }
}
