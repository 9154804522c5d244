//! Decoding with abstention and retrieval backoff.

use super::{greedy_select, record, DecodeOptions, DecodeResult, DecodeStatus, RetrievalEvent, Retriever, StepRecord};
use crate::error::{Error, Result};
use crate::model::ScoringModel;
use crate::oracle::{Oracle, SafeSetEngine};
use crate::types::{Fact, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstainParams {
    /// Minimum safe mass required to emit, in `[0, 1]`.
    pub tau: f64,
    /// Retrievals allowed per step before abstaining.
    pub retry_budget: usize,
}

impl Default for AbstainParams {
    fn default() -> Self {
        AbstainParams { tau: 0.0, retry_budget: 2 }
    }
}

impl AbstainParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::validation("tau", format!("must lie in [0, 1], got {}", self.tau)));
        }
        Ok(())
    }
}

fn binds(rec: &StepRecord, tau: f64) -> bool {
    rec.safe_set.is_empty() || rec.safe_mass < tau
}

/// Greedy decoding that backs off to retrieval whenever the safe set is
/// empty or lighter than `tau`, and abstains once a step has spent its
/// retry budget without recovering.
///
/// Retrieved facts accumulate in a session overlay seen by the oracle
/// through [`Oracle::judge_with`]. With `tau = 0` and no retries this is
/// exactly [`super::tad_decode`], including its empty-safe-set stop.
pub fn tad_decode_abstain(
    model: &ScoringModel,
    oracle: &dyn Oracle,
    horizon: usize,
    initial: &Trace,
    params: AbstainParams,
    retriever: &mut dyn Retriever,
    opts: DecodeOptions,
) -> Result<DecodeResult> {
    params.validate()?;
    let engine = SafeSetEngine::new(oracle, model.vocabulary().len(), opts.caching, opts.exec);
    let mut overlay: Vec<Fact> = Vec::new();
    let mut out = DecodeResult::start(initial.clone());
    let mut x = initial.clone();
    for t in 1..=horizon {
        let eval = engine.evaluate(&overlay, &x);
        let mut rec = record(model, t, &x, eval.safe, eval.queries)?;
        let mut retries = 0;
        while binds(&rec, params.tau) {
            if retries == params.retry_budget {
                out.status = if rec.safe_set.is_empty() && retries == 0 {
                    DecodeStatus::EmptySafeSet
                } else {
                    DecodeStatus::Abstained
                };
                out.steps.push(rec);
                return Ok(out);
            }
            retries += 1;
            let event = match retriever.retrieve(t, &x) {
                Ok(docs) => {
                    let documents = docs.len();
                    overlay.extend(docs.iter().cloned());
                    out.retrieved_facts.extend(docs);
                    let eval = engine.evaluate(&overlay, &x);
                    let next = record(model, t, &x, eval.safe, eval.queries + rec.oracle_queries)?;
                    let improved = next.safe_set != rec.safe_set || next.safe_mass != rec.safe_mass;
                    rec = next;
                    RetrievalEvent {
                        step: t,
                        documents,
                        improved,
                        error: None,
                    }
                }
                Err(e) => RetrievalEvent {
                    step: t,
                    documents: 0,
                    improved: false,
                    error: Some(e.to_string()),
                },
            };
            out.retrieval_events.push(event);
        }
        let w = greedy_select(model, &rec.safe_set, &x)?;
        rec.chosen = Some(w);
        out.steps.push(rec);
        x.push(w);
        out.trace.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::decoder::{tad_decode_with, NullRetriever, ScriptStep, ScriptedRetriever};
    use crate::kb::{Claim, ClaimTable, KbSpec, KnowledgeBase, Realization};
    use crate::model::ContextKind;
    use crate::oracle::KbOracle;
    use crate::types::{TokenId, Vocabulary};

    fn claims_setup() -> (ScoringModel, KbOracle, Fact) {
        let v = Vocabulary::new(["a", "b", "c"]).unwrap();
        let fact = Fact::new("paris", "capital_of", "france");
        let mut claims = ClaimTable::new();
        claims.insert(
            TokenId(1),
            Claim {
                subject: fact.subject.clone(),
                relation: fact.relation.clone(),
                object: fact.object.clone(),
                at: None,
            },
        );
        let kb = KbSpec {
            realization: Realization::Triples,
            ..KbSpec::default()
        }
        .build(&v, &claims)
        .unwrap();
        let m = ScoringModel::new(v, ContextKind::Exact, [], Some(vec![0.2, 0.7, 0.1]), true).unwrap();
        (m, KbOracle::new(Arc::new(kb)), fact)
    }

    fn abstain(
        m: &ScoringModel,
        o: &dyn Oracle,
        t: usize,
        tau: f64,
        budget: usize,
        r: &mut dyn Retriever,
    ) -> DecodeResult {
        let p = AbstainParams { tau, retry_budget: budget };
        tad_decode_abstain(m, o, t, &Trace::new(), p, r, DecodeOptions::default()).unwrap()
    }

    #[test]
    fn no_improvement_exhausts_budget() {
        let (m, o, _) = claims_setup();
        let r = abstain(&m, &o, 2, 0.95, 2, &mut NullRetriever);
        assert_eq!(r.status, DecodeStatus::Abstained);
        assert_eq!(r.retrieval_events.len(), 2);
        assert!(r.retrieval_events.iter().all(|e| !e.improved && e.documents == 0));
        assert!(r.trace.is_empty());
    }

    #[test]
    fn retrieval_unblocks_token() {
        let (m, o, fact) = claims_setup();
        let mut r = ScriptedRetriever::new([(1, vec![ScriptStep::Facts(vec![fact])])]);
        let out = abstain(&m, &o, 2, 0.5, 2, &mut r);
        assert_eq!(out.status, DecodeStatus::Completed);
        assert_eq!(out.trace.as_slice(), &[TokenId(1), TokenId(1)]);
        assert_eq!(out.retrieval_events.len(), 1);
        assert!(out.retrieval_events[0].improved);
        assert!((out.steps[0].safe_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retriever_failure_is_an_event() {
        let (m, o, _) = claims_setup();
        let mut r = ScriptedRetriever::new([(1, vec![ScriptStep::Fail("offline".into())])]);
        let out = abstain(&m, &o, 1, 0.5, 1, &mut r);
        assert_eq!(out.status, DecodeStatus::Abstained);
        assert_eq!(out.retrieval_events[0].error.as_deref(), Some("retriever failure: offline"));
    }

    #[test]
    fn zero_threshold_matches_tad() {
        let (m, o, _) = claims_setup();
        let a = abstain(&m, &o, 3, 0.0, 0, &mut NullRetriever);
        let t = tad_decode_with(&m, &o, 3, &Trace::new(), DecodeOptions::default()).unwrap();
        assert_eq!(a, t);
        let kb = KnowledgeBase::custom(|t: &[TokenId]| t.is_empty()).unwrap();
        let empty = KbOracle::new(Arc::new(kb));
        let a = abstain(&m, &empty, 3, 0.0, 0, &mut NullRetriever);
        assert_eq!(a.status, DecodeStatus::EmptySafeSet);
        assert_eq!(a, tad_decode_with(&m, &empty, 3, &Trace::new(), DecodeOptions::default()).unwrap());
    }

    #[test]
    fn rejects_bad_threshold() {
        let (m, o, _) = claims_setup();
        let p = AbstainParams { tau: 1.5, retry_budget: 0 };
        let e = tad_decode_abstain(&m, &o, 1, &Trace::new(), p, &mut NullRetriever, DecodeOptions::default());
        assert!(matches!(e, Err(Error::Validation { .. })));
    }
}
