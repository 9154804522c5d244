//! Fact retrieval used by the abstaining decoder.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Fact, TokenId};

pub trait Retriever {
    /// Facts to fold into the oracle's knowledge view at `step` (1-based).
    fn retrieve(&mut self, step: usize, prefix: &[TokenId]) -> Result<Vec<Fact>>;
}

/// Never finds anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullRetriever;

impl Retriever for NullRetriever {
    fn retrieve(&mut self, _: usize, _: &[TokenId]) -> Result<Vec<Fact>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptStep {
    Facts(Vec<Fact>),
    Fail(String),
}

/// Replays a fixed per-step queue of answers; an exhausted queue yields
/// no documents.
#[derive(Debug, Clone, Default)]
pub struct ScriptedRetriever {
    script: BTreeMap<usize, VecDeque<ScriptStep>>,
}

impl ScriptedRetriever {
    pub fn new(script: impl IntoIterator<Item = (usize, Vec<ScriptStep>)>) -> Self {
        ScriptedRetriever {
            script: script.into_iter().map(|(k, v)| (k, v.into())).collect(),
        }
    }
}

impl Retriever for ScriptedRetriever {
    fn retrieve(&mut self, step: usize, _: &[TokenId]) -> Result<Vec<Fact>> {
        match self.script.get_mut(&step).and_then(VecDeque::pop_front) {
            Some(ScriptStep::Facts(f)) => Ok(f),
            Some(ScriptStep::Fail(msg)) => Err(Error::Retriever(msg)),
            None => Ok(Vec::new()),
        }
    }
}
