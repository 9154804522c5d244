//! Tokens, vocabularies, traces and facts.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a token in its [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for TokenId {
    fn from(i: usize) -> Self {
        TokenId(i as u32)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: TokenId,
    pub surface: String,
}

/// The finite candidate universe. Iteration order is id order, which is
/// also the tie-breaking order of greedy selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    by_surface: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new<I, S>(surfaces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = Vec::new();
        let mut by_surface = HashMap::new();
        for (i, s) in surfaces.into_iter().enumerate() {
            let surface: String = s.into();
            if surface.is_empty() {
                return Err(Error::validation(
                    format!("vocabulary[{i}]"),
                    "token surface must be non-empty",
                ));
            }
            if surface.chars().any(char::is_whitespace) || surface == "*" || surface == "?" {
                return Err(Error::validation(
                    format!("vocabulary[{i}]"),
                    format!("surface `{surface}` may not contain whitespace or be a wildcard"),
                ));
            }
            let id = TokenId::from(i);
            if by_surface.insert(surface.clone(), id).is_some() {
                return Err(Error::validation(
                    format!("vocabulary[{i}]"),
                    format!("duplicate surface `{surface}`"),
                ));
            }
            tokens.push(Token { id, surface });
        }
        Ok(Vocabulary { tokens, by_surface })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn ids(&self) -> Vec<TokenId> {
        (0..self.tokens.len()).map(TokenId::from).collect()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    pub fn id(&self, surface: &str) -> Result<TokenId> {
        self.by_surface
            .get(surface)
            .copied()
            .ok_or_else(|| Error::UnknownToken(surface.to_string()))
    }

    pub fn surface(&self, id: TokenId) -> &str {
        self.tokens
            .get(id.index())
            .map(|t| t.surface.as_str())
            .unwrap_or("<oov>")
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    /// Resolve a list of surfaces into a trace.
    pub fn trace<S: AsRef<str>>(&self, surfaces: &[S]) -> Result<Trace> {
        surfaces
            .iter()
            .map(|s| self.id(s.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map(Trace::from)
    }

    pub fn render(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.surface(id).to_string()).collect()
    }
}

/// A finite token sequence; prefixes are traces too.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace(Vec<TokenId>);

impl Trace {
    pub fn new() -> Self {
        Trace(Vec::new())
    }

    /// First `n` tokens; the whole trace when `n >= len`.
    pub fn take(&self, n: usize) -> Trace {
        Trace(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn push(&mut self, w: TokenId) {
        self.0.push(w);
    }

    pub fn extended(&self, w: TokenId) -> Trace {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(w);
        Trace(v)
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<TokenId> {
        self.0
    }

    pub fn starts_with(&self, other: &[TokenId]) -> bool {
        self.0.starts_with(other)
    }
}

impl Deref for Trace {
    type Target = [TokenId];
    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for Trace {
    fn from(v: Vec<TokenId>) -> Self {
        Trace(v)
    }
}

impl From<&[TokenId]> for Trace {
    fn from(v: &[TokenId]) -> Self {
        Trace(v.to_vec())
    }
}

impl FromIterator<TokenId> for Trace {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

/// A (subject, relation, object) triple with an optional validity interval
/// in abstract ticks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub subject: String,
    pub relation: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_from: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_to: Option<i64>,
}

impl Fact {
    pub fn new(subject: &str, relation: &str, object: &str) -> Self {
        Fact {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
            valid_from: None,
            valid_to: None,
        }
    }

    pub fn valid(mut self, from: Option<i64>, to: Option<i64>) -> Self {
        self.valid_from = from;
        self.valid_to = to;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("subject", &self.subject),
            ("relation", &self.relation),
            ("object", &self.object),
        ] {
            if v.is_empty() {
                return Err(Error::validation(format!("fact.{name}"), "must be non-empty"));
            }
        }
        if let (Some(from), Some(to)) = (self.valid_from, self.valid_to) {
            if from > to {
                return Err(Error::validation(
                    "fact.valid_from",
                    format!("valid_from {from} exceeds valid_to {to}"),
                ));
            }
        }
        Ok(())
    }

    /// Interval containment with open ends.
    pub fn holds_at(&self, tick: i64) -> bool {
        self.valid_from.is_none_or(|f| f <= tick) && self.valid_to.is_none_or(|t| tick <= t)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.subject, self.relation, self.object)?;
        match (self.valid_from, self.valid_to) {
            (None, None) => Ok(()),
            (from, to) => write!(
                f,
                " valid [{}, {}]",
                from.map_or("-inf".to_string(), |v| v.to_string()),
                to.map_or("+inf".to_string(), |v| v.to_string())
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(Vocabulary::new(["a", "b", "a"]).is_err());
        assert!(Vocabulary::new(["a", ""]).is_err());
        assert!(Vocabulary::new(["a b"]).is_err());
        let v = Vocabulary::new(["fact", "support", "filler"]).unwrap();
        assert_eq!(v.id("support").unwrap(), TokenId(1));
        assert_eq!(v.surface(TokenId(2)), "filler");
        assert_eq!(v.id("nope"), Err(Error::UnknownToken("nope".into())));
    }

    #[test]
    fn take_truncates() {
        let t = Trace::from(vec![TokenId(0), TokenId(1), TokenId(2)]);
        assert_eq!(t.take(0), Trace::new());
        assert_eq!(t.take(2).as_slice(), &[TokenId(0), TokenId(1)]);
        assert_eq!(t.take(3), t);
        assert_eq!(t.take(9), t);
    }

    #[test]
    fn fact_interval() {
        let f = Fact::new("curie", "won", "nobel").valid(Some(1903), Some(1911));
        assert!(f.validate().is_ok());
        assert!(f.holds_at(1903) && f.holds_at(1911));
        assert!(!f.holds_at(1902));
        assert!(Fact::new("a", "b", "c").valid(Some(5), Some(1)).validate().is_err());
        assert!(Fact::new("", "b", "c").validate().is_err());
    }
}
