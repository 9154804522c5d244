use std::collections::BTreeSet;

use super::{AgentState, Check, VerificationAgent};
use crate::kb::{claim_status, ClaimStatus, ClaimTable};
use crate::types::{Fact, TokenId};

/// Checks the claim a token completes against the fact store.
///
/// Claims are template-tagged per token. A claim is approved when some
/// fact has the same triple and, for dated claims, an interval containing
/// the claim's tick. Anything else blocks, with the conflicting facts
/// offered as corrections.
pub struct FactualVerifier {
    name: String,
    claims: ClaimTable,
    facts: Vec<Fact>,
    cost: f64,
}

impl FactualVerifier {
    pub fn new(name: impl Into<String>, claims: ClaimTable, facts: Vec<Fact>, cost: f64) -> Self {
        FactualVerifier {
            name: name.into(),
            claims,
            facts,
            cost: cost.max(0.0),
        }
    }
}

impl VerificationAgent for FactualVerifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self) -> AgentState {
        AgentState::Factual {
            asserted: BTreeSet::new(),
        }
    }

    fn check(&self, _: &AgentState, _: &[TokenId], token: TokenId) -> Check {
        let Some(claim) = self.claims.get(&token) else {
            return Check::accept("no claim");
        };
        match claim_status(claim, &self.facts) {
            ClaimStatus::Supported => Check::accept(format!("claim {claim} supported")),
            ClaimStatus::Contradicted(known) => {
                let corrections: Vec<String> = known.iter().map(ToString::to_string).collect();
                Check::block(format!(
                    "claim {claim} mismatches knowledge base; proposed correction: {}",
                    corrections.join("; ")
                ))
            }
            ClaimStatus::Unsupported => Check::block(format!("no fact supports claim {claim}")),
        }
    }

    fn update(&self, state: &AgentState, _: &[TokenId], token: TokenId) -> AgentState {
        let mut asserted = match state {
            AgentState::Factual { asserted } => asserted.clone(),
            _ => BTreeSet::new(),
        };
        if let Some(claim) = self.claims.get(&token) {
            asserted.insert(claim.as_fact());
        }
        AgentState::Factual { asserted }
    }

    fn cost(&self, _: &AgentState, _: &[TokenId], _: TokenId) -> f64 {
        self.cost
    }
}
