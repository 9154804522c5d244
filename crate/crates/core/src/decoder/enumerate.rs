//! Exhaustive enumeration of knowledge-consistent sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::kb::KnowledgeBase;
use crate::types::{Trace, Vocabulary};

/// Upper bound on `|V|^max_len` for any brute-force enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnumBudget(pub u128);

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget(1_000_000)
    }
}

impl EnumBudget {
    pub const ENV: &'static str = "TAD_ENUM_BUDGET";

    pub fn required(vocab_len: usize, max_len: usize) -> u128 {
        let mut acc: u128 = 1;
        for _ in 0..max_len {
            acc = acc.saturating_mul(vocab_len as u128);
        }
        acc
    }

    pub fn check(self, vocab_len: usize, max_len: usize) -> Result<()> {
        let required = Self::required(vocab_len, max_len);
        if required > self.0 {
            return Err(Error::BudgetExceeded {
                required,
                budget: self.0,
            });
        }
        Ok(())
    }

    /// Budget from the environment, or the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(EnumBudget)
                .map_err(|_| Error::validation(Self::ENV, format!("not a non-negative integer: {v:?}"))),
            Err(_) => Ok(Self::default()),
        }
    }
}

/// Every sequence of length at most `max_len` all of whose truncations the
/// KB admits, sorted lexicographically by token id.
pub fn enumerate_truthful(kb: &KnowledgeBase, vocab: &Vocabulary, max_len: usize) -> Result<Vec<Trace>> {
    enumerate_truthful_exec(kb, vocab, max_len, EnumBudget::default(), Exec::default())
}

pub fn enumerate_truthful_exec(
    kb: &KnowledgeBase,
    vocab: &Vocabulary,
    max_len: usize,
    budget: EnumBudget,
    exec: Exec,
) -> Result<Vec<Trace>> {
    budget.check(vocab.len(), max_len)?;
    let ids = vocab.ids();
    let mut out = vec![Trace::new()];
    let mut level = vec![Trace::new()];
    for _ in 0..max_len {
        let next: Vec<Vec<Trace>> = exec::map(exec, &level, |x| {
            ids.iter()
                .map(|&w| x.extended(w))
                .filter(|ext| kb.admits(ext))
                .collect()
        });
        level = next.into_iter().flatten().collect();
        if level.is_empty() {
            break;
        }
        out.extend(level.iter().cloned());
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{knowledge_consistent, RuleSet, RuleSpec, Verdict};
    use crate::types::TokenId;

    #[test]
    fn toy_enumeration() {
        let v = Vocabulary::new(["fact", "support", "filler"]).unwrap();
        let rules = RuleSet::compile(&[RuleSpec::new("*", "filler", Verdict::Deny)], Verdict::Allow, &v).unwrap();
        let kb = KnowledgeBase::from_rules(rules);
        let all = enumerate_truthful(&kb, &v, 2).unwrap();
        assert_eq!(all.len(), 7);
        assert!(all[0].is_empty());
        assert_eq!(all[1].as_slice(), &[TokenId(0)]);
        assert!(all.iter().all(|t| knowledge_consistent(t, &kb)));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let seq = enumerate_truthful_exec(&kb, &v, 2, EnumBudget::default(), Exec::Sequential).unwrap();
        assert_eq!(seq, all);
    }

    #[test]
    fn budget_is_power() {
        assert_eq!(EnumBudget::required(3, 3), 27);
        assert_eq!(EnumBudget::required(5, 0), 1);
        assert!(EnumBudget(27).check(3, 3).is_ok());
        assert_eq!(
            EnumBudget(26).check(3, 3),
            Err(Error::BudgetExceeded { required: 27, budget: 26 })
        );
        assert_eq!(EnumBudget::required(usize::MAX, 10), u128::MAX);
    }
}
