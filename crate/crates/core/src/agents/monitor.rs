use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{AgentState, Check, VerificationAgent};
use crate::types::TokenId;

/// Discourse tags a token carries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tense: Option<String>,
}

/// Keeps entities bound to one attribute and holds topic and tense steady.
/// A topic or tense left open is fixed by the first token that sets it.
pub struct ContextMonitor {
    name: String,
    annotations: HashMap<TokenId, Annotation>,
    topic: Option<String>,
    tense: Option<String>,
    cost: f64,
}

impl ContextMonitor {
    pub fn new(
        name: impl Into<String>,
        annotations: HashMap<TokenId, Annotation>,
        topic: Option<String>,
        tense: Option<String>,
        cost: f64,
    ) -> Self {
        ContextMonitor {
            name: name.into(),
            annotations,
            topic,
            tense,
            cost: cost.max(0.0),
        }
    }
}

impl VerificationAgent for ContextMonitor {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self) -> AgentState {
        AgentState::Monitor {
            attributes: BTreeMap::new(),
            topic: self.topic.clone(),
            tense: self.tense.clone(),
        }
    }

    fn check(&self, state: &AgentState, _: &[TokenId], token: TokenId) -> Check {
        let Some(ann) = self.annotations.get(&token) else {
            return Check::accept("no context tags");
        };
        let AgentState::Monitor { attributes, topic, tense } = state else {
            return Check::block("context monitor received a foreign state");
        };
        if let (Some(entity), Some(attr)) = (&ann.entity, &ann.attribute) {
            if let Some(bound) = attributes.get(entity) {
                if bound != attr {
                    return Check::block(format!(
                        "memory conflict: {entity} already has attribute {bound}, candidate assigns {attr}"
                    ));
                }
            }
        }
        if let (Some(want), Some(got)) = (topic, &ann.topic) {
            if want != got {
                return Check::block(format!("off topic: discourse is about {want}, candidate is about {got}"));
            }
        }
        if let (Some(want), Some(got)) = (tense, &ann.tense) {
            if want != got {
                return Check::block(format!("tense shift: discourse is {want}, candidate is {got}"));
            }
        }
        Check::accept("context consistent")
    }

    fn update(&self, state: &AgentState, _: &[TokenId], token: TokenId) -> AgentState {
        let mut next = match state {
            AgentState::Monitor { .. } => state.clone(),
            _ => self.initial_state(),
        };
        if let (Some(ann), AgentState::Monitor { attributes, topic, tense }) = (self.annotations.get(&token), &mut next) {
            if let (Some(e), Some(a)) = (&ann.entity, &ann.attribute) {
                attributes.entry(e.clone()).or_insert_with(|| a.clone());
            }
            if topic.is_none() {
                topic.clone_from(&ann.topic);
            }
            if tense.is_none() {
                tense.clone_from(&ann.tense);
            }
        }
        next
    }

    fn cost(&self, _: &AgentState, _: &[TokenId], _: TokenId) -> f64 {
        self.cost
    }
}
