//! Verification agents and their joint constraint.
//!
//! An agent carries a private state, an acceptance predicate, a
//! deterministic update and a per-call cost in abstract cycles. A cohort
//! accepts exactly the tokens every member accepts.

mod factual;
mod monitor;
mod reasoner;

pub use factual::FactualVerifier;
pub use monitor::{Annotation, ContextMonitor};
pub use reasoner::{MathReasoner, ReasonerRule, ReasonerRuleSpec, StepResult};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exec::{self, Exec};
use crate::oracle::Oracle;
use crate::types::{Fact, TokenId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentState {
    Stateless,
    Factual {
        asserted: BTreeSet<Fact>,
    },
    Reasoner {
        proof_state: String,
    },
    Monitor {
        attributes: BTreeMap<String, String>,
        topic: Option<String>,
        tense: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Block,
    /// Undecided; blocks for decoding and asks for a lemma scaffold.
    ScaffoldRequest,
}

/// Outcome of one acceptance check. Non-accepting checks always explain
/// themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub decision: Decision,
    pub justification: String,
}

impl Check {
    pub fn accept(why: impl Into<String>) -> Self {
        Check {
            decision: Decision::Accept,
            justification: why.into(),
        }
    }

    pub fn block(why: impl Into<String>) -> Self {
        let justification = why.into();
        debug_assert!(!justification.is_empty());
        Check {
            decision: Decision::Block,
            justification,
        }
    }

    pub fn scaffold(why: impl Into<String>) -> Self {
        Check {
            decision: Decision::ScaffoldRequest,
            justification: why.into(),
        }
    }

    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentVerdict {
    pub agent: String,
    pub token: TokenId,
    pub decision: Decision,
    pub justification: String,
}

pub trait VerificationAgent: Send + Sync {
    fn name(&self) -> &str;

    fn initial_state(&self) -> AgentState;

    fn check(&self, state: &AgentState, prefix: &[TokenId], token: TokenId) -> Check;

    fn accept(&self, state: &AgentState, prefix: &[TokenId], token: TokenId) -> bool {
        self.check(state, prefix, token).accepted()
    }

    /// State after emitting `token` following `prefix`.
    fn update(&self, state: &AgentState, prefix: &[TokenId], token: TokenId) -> AgentState;

    /// Non-negative cost in cycles of checking `token`.
    fn cost(&self, state: &AgentState, prefix: &[TokenId], token: TokenId) -> f64;
}

pub type AgentRef = Arc<dyn VerificationAgent>;

/// Stateless agent backed by an oracle.
pub struct OracleAgent<O> {
    name: String,
    oracle: O,
    cost: f64,
}

impl<O: Oracle> OracleAgent<O> {
    pub fn new(name: impl Into<String>, oracle: O, cost: f64) -> Self {
        OracleAgent {
            name: name.into(),
            oracle,
            cost: cost.max(0.0),
        }
    }
}

impl<O: Oracle> VerificationAgent for OracleAgent<O> {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self) -> AgentState {
        AgentState::Stateless
    }

    fn check(&self, _: &AgentState, prefix: &[TokenId], token: TokenId) -> Check {
        if self.oracle.judge(prefix, token) {
            Check::accept("oracle approves")
        } else {
            Check::block(format!("oracle rejects token {token} after a prefix of length {}", prefix.len()))
        }
    }

    fn update(&self, state: &AgentState, _: &[TokenId], _: TokenId) -> AgentState {
        state.clone()
    }

    fn cost(&self, _: &AgentState, _: &[TokenId], _: TokenId) -> f64 {
        self.cost
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaOutcome {
    pub safe: Vec<TokenId>,
    /// Agent-major: all tokens for the first agent, then the next.
    pub verdicts: Vec<AgentVerdict>,
}

/// Joint constraint: tokens every agent accepts, in vocabulary order.
pub fn gamma(agents: &[AgentRef], states: &[AgentState], prefix: &[TokenId], vocab_len: usize, exec: Exec) -> GammaOutcome {
    assert_eq!(agents.len(), states.len(), "one state per agent");
    let ids: Vec<TokenId> = (0..vocab_len).map(TokenId::from).collect();
    let per_token: Vec<Vec<Check>> = exec::map(exec, &ids, |&w| {
        agents.iter().zip(states).map(|(a, s)| a.check(s, prefix, w)).collect()
    });
    let safe = ids
        .iter()
        .zip(&per_token)
        .filter(|(_, checks)| checks.iter().all(Check::accepted))
        .map(|(&w, _)| w)
        .collect();
    let mut verdicts = Vec::with_capacity(agents.len() * ids.len());
    for (i, agent) in agents.iter().enumerate() {
        for (&w, checks) in ids.iter().zip(&per_token) {
            let c = &checks[i];
            verdicts.push(AgentVerdict {
                agent: agent.name().to_string(),
                token: w,
                decision: c.decision,
                justification: c.justification.clone(),
            });
        }
    }
    GammaOutcome { safe, verdicts }
}

/// Advance every agent past `chosen`, which must come from the last
/// [`gamma`] result.
pub fn update_states(agents: &[AgentRef], states: &[AgentState], prefix: &[TokenId], chosen: TokenId) -> Vec<AgentState> {
    agents
        .iter()
        .zip(states)
        .map(|(a, s)| a.update(s, prefix, chosen))
        .collect()
}

pub fn agent_costs(agents: &[AgentRef], states: &[AgentState], prefix: &[TokenId], chosen: TokenId) -> Vec<f64> {
    agents
        .iter()
        .zip(states)
        .map(|(a, s)| a.cost(s, prefix, chosen).max(0.0))
        .collect()
}

pub fn cohort_cost(agents: &[AgentRef], states: &[AgentState], prefix: &[TokenId], chosen: TokenId) -> f64 {
    agent_costs(agents, states, prefix, chosen).iter().sum()
}

/// States reached by replaying `trace` from the initial states.
pub fn replay_states(agents: &[AgentRef], trace: &[TokenId]) -> Vec<AgentState> {
    let mut states: Vec<AgentState> = agents.iter().map(|a| a.initial_state()).collect();
    for i in 0..trace.len() {
        states = update_states(agents, &states, &trace[..i], trace[i]);
    }
    states
}

/// The synthetic oracle `O'(x, w) := w ∈ Γ(x, s(x))`, where `s(x)` is the
/// cohort state after replaying `x`.
#[derive(Clone)]
pub struct CohortOracle {
    agents: Vec<AgentRef>,
}

impl CohortOracle {
    pub fn new(agents: Vec<AgentRef>) -> Self {
        CohortOracle { agents }
    }
}

impl Oracle for CohortOracle {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        let states = replay_states(&self.agents, prefix);
        self.agents
            .iter()
            .zip(&states)
            .all(|(a, s)| a.accept(s, prefix, token))
    }
}

/// One agent's acceptance predicate viewed as an oracle, with its state
/// replayed along the prefix.
pub struct AgentOracle(pub AgentRef);

impl Oracle for AgentOracle {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        let agents = std::slice::from_ref(&self.0);
        let states = replay_states(agents, prefix);
        self.0.accept(&states[0], prefix, token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ConstOracle, FnOracle};

    fn set_agent(name: &str, allowed: &'static [u32], cost: f64) -> AgentRef {
        Arc::new(OracleAgent::new(
            name,
            FnOracle(move |_: &[TokenId], w: TokenId| allowed.contains(&w.0)),
            cost,
        ))
    }

    #[test]
    fn gamma_is_intersection() {
        let all: AgentRef = Arc::new(OracleAgent::new("all", ConstOracle(true), 0.0));
        let s = vec![AgentState::Stateless];
        assert_eq!(gamma(std::slice::from_ref(&all), &s, &[], 3, Exec::Sequential).safe.len(), 3);

        let agents = vec![set_agent("ab", &[0, 1], 0.2), set_agent("bc", &[1, 2], 0.3)];
        let states = vec![AgentState::Stateless; 2];
        let out = gamma(&agents, &states, &[], 3, Exec::Sequential);
        assert_eq!(out.safe, vec![TokenId(1)]);
        assert_eq!(out.verdicts.len(), 6);
        assert!(out
            .verdicts
            .iter()
            .filter(|v| v.decision == Decision::Block)
            .all(|v| !v.justification.is_empty()));
        assert_eq!(out.verdicts[0].agent, "ab");
        assert_eq!(out.verdicts[3].agent, "bc");
    }

    #[test]
    fn gamma_ignores_agent_order() {
        let a = vec![set_agent("ab", &[0, 1, 3], 0.0), set_agent("bc", &[1, 2, 3], 0.0), set_agent("x", &[3, 1], 0.0)];
        let mut b = a.clone();
        b.reverse();
        let s = vec![AgentState::Stateless; 3];
        assert_eq!(
            gamma(&a, &s, &[], 5, Exec::Sequential).safe,
            gamma(&b, &s, &[], 5, Exec::Parallel).safe
        );
    }

    #[test]
    fn costs_sum() {
        let agents = vec![set_agent("a", &[0], 0.2), set_agent("b", &[0], 0.3), set_agent("c", &[0], 0.1)];
        let states = vec![AgentState::Stateless; 3];
        let c = cohort_cost(&agents, &states, &[], TokenId(0));
        assert!((c - 0.6).abs() < 1e-12);
        let zero = vec![set_agent("z", &[0], 0.0)];
        assert_eq!(cohort_cost(&zero, &[AgentState::Stateless], &[], TokenId(0)), 0.0);
        // negative constants are clamped at construction
        let neg: AgentRef = Arc::new(OracleAgent::new("n", ConstOracle(true), -1.0));
        assert_eq!(neg.cost(&AgentState::Stateless, &[], TokenId(0)), 0.0);
    }

    #[test]
    fn identity_updates_keep_states() {
        let agents = vec![set_agent("a", &[0], 0.0)];
        let states = vec![AgentState::Stateless];
        assert_eq!(update_states(&agents, &states, &[], TokenId(0)), states);
    }
}
