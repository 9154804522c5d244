//! Scenarios shipped with the binary.

use super::Scenario;
use crate::error::{Error, Result};

pub const BUNDLED: &[(&str, &str)] = &[
    ("worked_example", include_str!("../../scenarios/worked_example.json")),
    ("lean_toy", include_str!("../../scenarios/lean_toy.json")),
    ("lean_greedy", include_str!("../../scenarios/lean_greedy.json")),
    ("incomplete_oracle", include_str!("../../scenarios/incomplete_oracle.json")),
    ("guarded_cohort", include_str!("../../scenarios/guarded_cohort.json")),
    ("abstain_no_improvement", include_str!("../../scenarios/abstain_no_improvement.json")),
    ("abstain_retrieval", include_str!("../../scenarios/abstain_retrieval.json")),
    ("proof_toy", include_str!("../../scenarios/proof_toy.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::validation("scenario", format!("no bundled scenario named {name}")))?;
    Scenario::from_json(text)
}


#[cfg(test)]
mod run_tests {
    use super::*;
    use crate::scenario::{run_compiled, Quantity};
    use crate::Exec;

    #[test]
    fn bundled_goldens_match() {
        for name in bundled_names() {
            let c = bundled(name).unwrap().compile().unwrap();
            let out = run_compiled(&c, Exec::Sequential).unwrap();
            let golden = out.report.golden.expect("every bundled scenario has an expectation");
            assert!(golden.matched, "{name}: {:?}", golden.mismatches);
            for d in &out.report.discrepancies {
                let known = matches!(
                    (d.quantity, d.at),
                    (Quantity::SemanticEntropy, 1) | (Quantity::Amdahl, 1)
                );
                assert_eq!(d.agrees, !known, "{name}: {:?}@{}", d.quantity, d.at);
            }
        }
    }
}
