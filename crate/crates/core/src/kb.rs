//! Knowledge bases and the knowledge-consistency predicate.
//!
//! A knowledge base decides membership of whole token sequences. Two
//! realizations share that contract: a first-match rule table over
//! (prefix pattern, next token), and a triple store consulted through the
//! claim each token asserts. Either way the empty trace is a member.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Fact, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Elem<L> {
    /// Any run of items, possibly empty.
    Star,
    /// Exactly one item.
    One,
    Lit(L),
}

/// Glob over item sequences: whitespace-separated elements where `*`
/// matches any run, `?` matches a single item and anything else is a
/// literal. The empty pattern matches only the empty sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern<L> {
    elems: Vec<Elem<L>>,
}

impl<L: PartialEq> Pattern<L> {
    pub fn parse(text: &str, mut resolve: impl FnMut(&str) -> Result<L>) -> Result<Self> {
        let elems = text
            .split_whitespace()
            .map(|item| match item {
                "*" => Ok(Elem::Star),
                "?" => Ok(Elem::One),
                lit => resolve(lit).map(Elem::Lit),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Pattern { elems })
    }

    pub fn any() -> Self {
        Pattern {
            elems: vec![Elem::Star],
        }
    }

    pub fn matches(&self, items: &[L]) -> bool {
        let (mut p, mut i) = (0usize, 0usize);
        let mut backtrack: Option<(usize, usize)> = None;
        while i < items.len() {
            match self.elems.get(p) {
                Some(Elem::Star) => {
                    backtrack = Some((p, i));
                    p += 1;
                }
                Some(Elem::One) => {
                    p += 1;
                    i += 1;
                }
                Some(Elem::Lit(l)) if *l == items[i] => {
                    p += 1;
                    i += 1;
                }
                _ => match backtrack {
                    Some((sp, si)) => {
                        p = sp + 1;
                        i = si + 1;
                        backtrack = Some((sp, si + 1));
                    }
                    None => return false,
                },
            }
        }
        self.elems[p..].iter().all(|e| matches!(e, Elem::Star))
    }
}

/// Serialized rule: `{prefix_pattern, token, verdict}`. `token` may be `*`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub prefix_pattern: String,
    pub token: String,
    pub verdict: Verdict,
}

impl RuleSpec {
    pub fn new(prefix_pattern: &str, token: &str, verdict: Verdict) -> Self {
        RuleSpec {
            prefix_pattern: prefix_pattern.to_string(),
            token: token.to_string(),
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub prefix: Pattern<TokenId>,
    /// `None` matches every token.
    pub token: Option<TokenId>,
    pub verdict: Verdict,
}

/// First-match-wins rule table with a declared default verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    default: Verdict,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>, default: Verdict) -> Self {
        RuleSet { rules, default }
    }

    pub fn compile(specs: &[RuleSpec], default: Verdict, vocab: &Vocabulary) -> Result<Self> {
        let rules = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let prefix = Pattern::parse(&spec.prefix_pattern, |s| vocab.id(s))
                    .map_err(|e| Error::validation(format!("rules[{i}].prefix_pattern"), e.to_string()))?;
                let token = match spec.token.as_str() {
                    "*" => None,
                    s => Some(
                        vocab
                            .id(s)
                            .map_err(|e| Error::validation(format!("rules[{i}].token"), e.to_string()))?,
                    ),
                };
                Ok(Rule {
                    prefix,
                    token,
                    verdict: spec.verdict,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleSet { rules, default })
    }

    pub fn default_verdict(&self) -> Verdict {
        self.default
    }

    pub fn evaluate(&self, prefix: &[TokenId], token: TokenId) -> Verdict {
        self.rules
            .iter()
            .find(|r| r.token.is_none_or(|t| t == token) && r.prefix.matches(prefix))
            .map_or(self.default, |r| r.verdict)
    }

    /// All allowed tokens after `prefix`, matching each prefix pattern once.
    pub fn allowed(&self, prefix: &[TokenId], vocab_len: usize) -> Vec<TokenId> {
        let live: Vec<&Rule> = self.rules.iter().filter(|r| r.prefix.matches(prefix)).collect();
        (0..vocab_len)
            .map(TokenId::from)
            .filter(|&w| {
                live.iter()
                    .find(|r| r.token.is_none_or(|t| t == w))
                    .map_or(self.default, |r| r.verdict)
                    == Verdict::Allow
            })
            .collect()
    }
}

/// The triple a token asserts when emitted, optionally at a tick.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub subject: String,
    pub relation: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<i64>,
}

impl Claim {
    pub fn as_fact(&self) -> Fact {
        Fact {
            subject: self.subject.clone(),
            relation: self.relation.clone(),
            object: self.object.clone(),
            valid_from: self.at,
            valid_to: self.at,
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.subject, self.relation, self.object)?;
        if let Some(at) = self.at {
            write!(f, " @{at}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClaimStatus {
    Supported,
    /// Facts about the same subject and relation exist but disagree on the
    /// object or the timeline. Holds the facts usable as corrections.
    Contradicted(Vec<Fact>),
    /// Nothing is known about the subject and relation.
    Unsupported,
}

/// Closed-world lookup of a claim against a fact collection.
pub fn claim_status<'a>(claim: &Claim, facts: impl IntoIterator<Item = &'a Fact>) -> ClaimStatus {
    let mut related = Vec::new();
    for f in facts {
        if f.subject != claim.subject || f.relation != claim.relation {
            continue;
        }
        if f.object == claim.object && claim.at.is_none_or(|t| f.holds_at(t)) {
            return ClaimStatus::Supported;
        }
        related.push(f.clone());
    }
    if related.is_empty() {
        ClaimStatus::Unsupported
    } else {
        related.sort();
        related.dedup();
        ClaimStatus::Contradicted(related)
    }
}

pub type ClaimTable = BTreeMap<TokenId, Claim>;

pub type CustomPredicate = Arc<dyn Fn(&[TokenId]) -> bool + Send + Sync>;

/// How the knowledge base decides membership of a sequence.
#[derive(Clone)]
pub enum SequencePredicate {
    AdmitAll,
    /// `x ∥ w` is a member iff the table allows `w` after `x`.
    Rules(RuleSet),
    /// `x ∥ w` is a member iff the claim `w` carries (if any) is supported.
    Triples(ClaimTable),
    Custom(CustomPredicate),
}

impl fmt::Debug for SequencePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequencePredicate::AdmitAll => f.write_str("AdmitAll"),
            SequencePredicate::Rules(r) => f.debug_tuple("Rules").field(r).finish(),
            SequencePredicate::Triples(c) => f.debug_tuple("Triples").field(c).finish(),
            SequencePredicate::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    facts: Vec<Fact>,
    predicate: SequencePredicate,
}

impl KnowledgeBase {
    pub fn new(facts: Vec<Fact>, predicate: SequencePredicate) -> Result<Self> {
        for f in &facts {
            f.validate()?;
        }
        if matches!(&predicate, SequencePredicate::Custom(f) if !f(&[])) {
            return Err(Error::validation(
                "kb",
                "predicate rejects the empty trace (base axiom)",
            ));
        }
        Ok(KnowledgeBase { facts, predicate })
    }

    pub fn admit_all() -> Self {
        KnowledgeBase {
            facts: Vec::new(),
            predicate: SequencePredicate::AdmitAll,
        }
    }

    pub fn from_rules(rules: RuleSet) -> Self {
        KnowledgeBase {
            facts: Vec::new(),
            predicate: SequencePredicate::Rules(rules),
        }
    }

    pub fn custom(f: impl Fn(&[TokenId]) -> bool + Send + Sync + 'static) -> Result<Self> {
        KnowledgeBase::new(Vec::new(), SequencePredicate::Custom(Arc::new(f)))
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn predicate(&self) -> &SequencePredicate {
        &self.predicate
    }

    /// Membership of `trace` in the sequence set.
    pub fn admits(&self, trace: &[TokenId]) -> bool {
        self.admits_with(&[], trace)
    }

    /// Membership with extra facts folded into the triple store.
    pub fn admits_with(&self, overlay: &[Fact], trace: &[TokenId]) -> bool {
        let Some((&last, prefix)) = trace.split_last() else {
            return true;
        };
        match &self.predicate {
            SequencePredicate::AdmitAll => true,
            SequencePredicate::Rules(rules) => rules.evaluate(prefix, last) == Verdict::Allow,
            SequencePredicate::Triples(claims) => match claims.get(&last) {
                None => true,
                Some(claim) => {
                    claim_status(claim, self.facts.iter().chain(overlay)) == ClaimStatus::Supported
                }
            },
            SequencePredicate::Custom(f) => f(trace),
        }
    }
}

/// True iff every non-empty truncation of `trace` is admitted by `kb`.
pub fn knowledge_consistent(trace: &[TokenId], kb: &KnowledgeBase) -> bool {
    knowledge_consistent_with(trace, kb, &[])
}

pub fn knowledge_consistent_with(trace: &[TokenId], kb: &KnowledgeBase, overlay: &[Fact]) -> bool {
    (1..=trace.len()).all(|s| kb.admits_with(overlay, &trace[..s]))
}

/// On-disk knowledge-base document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbSpec {
    #[serde(default)]
    pub realization: Realization,
    #[serde(default)]
    pub facts: Vec<Fact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<RuleSpec>,
    #[serde(default = "default_allow")]
    pub default: Verdict,
}

fn default_allow() -> Verdict {
    Verdict::Allow
}

impl Default for KbSpec {
    fn default() -> Self {
        KbSpec {
            realization: Realization::Rules,
            facts: Vec::new(),
            rules: Vec::new(),
            default: Verdict::Allow,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    #[default]
    Rules,
    Triples,
}

impl KbSpec {
    pub fn build(&self, vocab: &Vocabulary, claims: &ClaimTable) -> Result<KnowledgeBase> {
        let predicate = match self.realization {
            Realization::Rules => SequencePredicate::Rules(RuleSet::compile(&self.rules, self.default, vocab)?),
            Realization::Triples => SequencePredicate::Triples(claims.clone()),
        };
        KnowledgeBase::new(self.facts.clone(), predicate)
    }
}
