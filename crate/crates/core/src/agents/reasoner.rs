use serde::{Deserialize, Serialize};

use super::{AgentState, Check, VerificationAgent};
use crate::error::{Error, Result};
use crate::kb::Pattern;
use crate::types::{TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepResult {
    True,
    False,
    Unknown,
}

/// Serialized rule: proof-state glob, step surface (or `*`), result and
/// the premise cited in justifications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonerRuleSpec {
    pub state: String,
    pub step: String,
    pub result: StepResult,
    #[serde(default)]
    pub premise: String,
}

#[derive(Debug, Clone)]
pub struct ReasonerRule {
    state: Pattern<String>,
    step: Option<String>,
    result: StepResult,
    premise: String,
}

/// Rule-table soundness oracle over proof steps. The proof state is the
/// space-separated list of accepted steps.
pub struct MathReasoner {
    name: String,
    vocab: Vocabulary,
    rules: Vec<ReasonerRule>,
    default: StepResult,
    cost: f64,
}

impl MathReasoner {
    pub fn new(name: impl Into<String>, vocab: Vocabulary, specs: &[ReasonerRuleSpec], default: StepResult, cost: f64) -> Result<Self> {
        let rules = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let state = Pattern::parse(&spec.state, |s| vocab.id(s).map(|_| s.to_string()))
                    .map_err(|e| Error::validation(format!("reasoner.rules[{i}].state"), e.to_string()))?;
                let step = match spec.step.as_str() {
                    "*" => None,
                    s => {
                        vocab
                            .id(s)
                            .map_err(|e| Error::validation(format!("reasoner.rules[{i}].step"), e.to_string()))?;
                        Some(s.to_string())
                    }
                };
                Ok(ReasonerRule {
                    state,
                    step,
                    result: spec.result,
                    premise: spec.premise.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MathReasoner {
            name: name.into(),
            vocab,
            rules,
            default,
            cost: cost.max(0.0),
        })
    }

    /// `(result, premise)` for a candidate step after `proof_state`.
    pub fn soundness(&self, proof_state: &str, step: &str) -> (StepResult, &str) {
        let items: Vec<String> = proof_state.split_whitespace().map(String::from).collect();
        self.rules
            .iter()
            .find(|r| r.step.as_deref().is_none_or(|s| s == step) && r.state.matches(&items))
            .map_or((self.default, ""), |r| (r.result, r.premise.as_str()))
    }
}

impl VerificationAgent for MathReasoner {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self) -> AgentState {
        AgentState::Reasoner {
            proof_state: String::new(),
        }
    }

    fn check(&self, state: &AgentState, _: &[TokenId], token: TokenId) -> Check {
        let proof_state = match state {
            AgentState::Reasoner { proof_state } => proof_state.as_str(),
            _ => "",
        };
        let step = self.vocab.surface(token);
        match self.soundness(proof_state, step) {
            (StepResult::True, "") => Check::accept(format!("{step} follows")),
            (StepResult::True, premise) => Check::accept(format!("{step} follows by {premise}")),
            (StepResult::False, premise) => {
                let premise = if premise.is_empty() { "no applicable axiom" } else { premise };
                Check::block(format!("{step} is unsound; violated premise: {premise}"))
            }
            (StepResult::Unknown, _) => Check::scaffold(format!(
                "cannot decide {step} after [{proof_state}]; request lemma scaffold"
            )),
        }
    }

    fn update(&self, state: &AgentState, _: &[TokenId], token: TokenId) -> AgentState {
        let mut proof_state = match state {
            AgentState::Reasoner { proof_state } => proof_state.clone(),
            _ => String::new(),
        };
        if !proof_state.is_empty() {
            proof_state.push(' ');
        }
        proof_state.push_str(self.vocab.surface(token));
        AgentState::Reasoner { proof_state }
    }

    fn cost(&self, _: &AgentState, _: &[TokenId], _: TokenId) -> f64 {
        self.cost
    }
}
