//! Safe mass, semantic entropy and density, the safe-entropy bound, the
//! risk functional, and selective-prediction statistics.
//!
//! Entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ScoringModel;
use crate::types::{TokenId, Vocabulary};

/// Σ over `safe` of the score vector.
pub fn mass_of(probs: &[f64], safe: &[TokenId]) -> f64 {
    safe.iter().map(|w| probs[w.index()]).sum()
}

/// Entropy of `probs` renormalized over `safe`.
pub fn restricted_entropy(probs: &[f64], safe: &[TokenId]) -> Result<f64> {
    let pi = mass_of(probs, safe);
    if pi <= 0.0 {
        return Err(Error::DegenerateSupport);
    }
    Ok(safe
        .iter()
        .map(|w| probs[w.index()] / pi)
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.ln())
        .sum::<f64>()
        // a point mass sums to -0.0
        + 0.0)
}

/// Shannon entropy of a full score vector.
pub fn entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>() + 0.0
}

/// The two terms of the safe-entropy bound and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyBound {
    /// `H(P) / π + ln π`
    pub information: f64,
    /// `ln |S|`
    pub cardinality: f64,
    pub bound: f64,
}

pub fn entropy_bound_of(probs: &[f64], safe: &[TokenId]) -> Result<EntropyBound> {
    let pi = mass_of(probs, safe);
    if pi <= 0.0 {
        return Err(Error::DegenerateSupport);
    }
    let information = entropy(probs) / pi + pi.ln();
    let cardinality = (safe.len() as f64).ln();
    Ok(EntropyBound {
        information,
        cardinality,
        bound: information.min(cardinality),
    })
}

pub fn safe_mass(model: &ScoringModel, prefix: &[TokenId], safe: &[TokenId]) -> Result<f64> {
    let probs = model.distribution(prefix)?;
    check_members(probs.len(), safe)?;
    Ok(mass_of(probs, safe))
}

pub fn semantic_entropy(model: &ScoringModel, prefix: &[TokenId], safe: &[TokenId]) -> Result<f64> {
    let probs = model.distribution(prefix)?;
    check_members(probs.len(), safe)?;
    restricted_entropy(probs, safe)
}

pub fn semantic_density(safe: &[TokenId], vocab: &Vocabulary) -> f64 {
    density_of(safe.len(), vocab.len())
}

pub fn density_of(safe_len: usize, vocab_len: usize) -> f64 {
    if vocab_len == 0 {
        0.0
    } else {
        safe_len as f64 / vocab_len as f64
    }
}

pub fn entropy_bound(model: &ScoringModel, prefix: &[TokenId], safe: &[TokenId]) -> Result<f64> {
    Ok(entropy_bound_parts(model, prefix, safe)?.bound)
}

pub fn entropy_bound_parts(model: &ScoringModel, prefix: &[TokenId], safe: &[TokenId]) -> Result<EntropyBound> {
    let probs = model.distribution(prefix)?;
    check_members(probs.len(), safe)?;
    entropy_bound_of(probs, safe)
}

fn check_members(len: usize, safe: &[TokenId]) -> Result<()> {
    match safe.iter().find(|w| w.index() >= len) {
        Some(w) => Err(Error::UnknownToken(w.to_string())),
        None => Ok(()),
    }
}

/// Utility weight assigned to abstentions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPolicy {
    omega: f64,
}

impl RiskPolicy {
    pub fn new(omega: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::validation("omega", format!("{omega} is outside [0, 1]")));
        }
        Ok(RiskPolicy { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// `ω (1 − π) + (1 − ω) · [prefix inconsistent]`
pub fn risk(prefix_consistent: bool, pi: f64, policy: RiskPolicy) -> f64 {
    let w = policy.omega;
    let violation = if prefix_consistent { 0.0 } else { 1.0 };
    w * (1.0 - pi) + (1.0 - w) * violation
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCounts {
    pub n_total: u64,
    pub n_answered: u64,
    pub n_correct: u64,
    pub n_abstained: u64,
}

impl BenchmarkCounts {
    pub fn new(n_total: u64, n_answered: u64, n_correct: u64, n_abstained: u64) -> Result<Self> {
        let c = BenchmarkCounts {
            n_total,
            n_answered,
            n_correct,
            n_abstained,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(Error::validation("n_total", "must be positive"));
        }
        if self.n_answered + self.n_abstained != self.n_total {
            return Err(Error::validation(
                "n_answered",
                format!(
                    "answered ({}) + abstained ({}) must equal total ({})",
                    self.n_answered, self.n_abstained, self.n_total
                ),
            ));
        }
        if self.n_correct > self.n_answered {
            return Err(Error::validation("n_correct", "cannot exceed n_answered"));
        }
        Ok(())
    }

    pub fn accuracy(&self) -> f64 {
        self.n_correct as f64 / self.n_total as f64
    }

    /// Abstentions count as errors.
    pub fn errors(&self) -> u64 {
        self.n_total - self.n_correct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub accuracy: f64,
    pub error: f64,
    pub coverage: f64,
    pub accuracy_given_answered: Option<f64>,
    pub utility: f64,
    pub relative_gain: Option<f64>,
    pub error_reduction: Option<f64>,
}

pub fn benchmark_stats(counts: &BenchmarkCounts, policy: RiskPolicy, baseline: Option<&BenchmarkCounts>) -> Result<BenchmarkReport> {
    counts.validate()?;
    let total = counts.n_total as f64;
    let accuracy = counts.accuracy();
    let accuracy_given_answered = (counts.n_answered > 0).then(|| counts.n_correct as f64 / counts.n_answered as f64);
    let utility = (counts.n_correct as f64 + policy.omega * counts.n_abstained as f64) / total;
    let (relative_gain, error_reduction) = match baseline {
        None => (None, None),
        Some(base) => {
            base.validate()?;
            if base.n_correct == 0 {
                return Err(Error::DivisionByZero("baseline accuracy is zero"));
            }
            if base.errors() == 0 {
                return Err(Error::DivisionByZero("baseline has no errors"));
            }
            (
                Some(accuracy / base.accuracy() - 1.0),
                Some(1.0 - counts.errors() as f64 / base.errors() as f64),
            )
        }
    };
    Ok(BenchmarkReport {
        accuracy,
        error: counts.errors() as f64 / total,
        coverage: counts.n_answered as f64 / total,
        accuracy_given_answered,
        utility,
        relative_gain,
        error_reduction,
    })
}

/// `Pr[truth | π] ≈ σ(a + b π)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticFit {
    pub a: f64,
    pub b: f64,
}

impl LogisticFit {
    pub fn predict(&self, pi: f64) -> f64 {
        1.0 / (1.0 + (-(self.a + self.b * pi)).exp())
    }
}

/// Full-batch gradient descent on the mean log-loss.
pub fn fit_logistic(scores: &[f64], labels: &[bool], iterations: usize, learning_rate: f64) -> Result<LogisticFit> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::validation("labels", "need one label per score and at least one pair"));
    }
    let n = scores.len() as f64;
    let mut fit = LogisticFit { a: 0.0, b: 0.0 };
    for _ in 0..iterations {
        let (mut ga, mut gb) = (0.0, 0.0);
        for (&x, &y) in scores.iter().zip(labels) {
            let r = fit.predict(x) - if y { 1.0 } else { 0.0 };
            ga += r;
            gb += r * x;
        }
        fit.a -= learning_rate * ga / n;
        fit.b -= learning_rate * gb / n;
    }
    Ok(fit)
}

/// Probability that a random positive outscores a random negative (ties
/// count half). `None` without both classes.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: [f64; 4] = [0.42, 0.28, 0.20, 0.10];

    fn ids(v: &[u32]) -> Vec<TokenId> {
        v.iter().map(|&i| TokenId(i)).collect()
    }

    #[test]
    fn worked_example_mass_and_entropy() {
        let s = ids(&[0, 1, 2]);
        assert!((mass_of(&WORKED, &s) - 0.90).abs() < 1e-12);
        assert_eq!(mass_of(&WORKED, &[]), 0.0);
        // -Σ q ln q for q = (0.42, 0.28, 0.20) / 0.90, evaluated by hand in
        // extended precision.
        let h = restricted_entropy(&WORKED, &s).unwrap();
        assert!((h - 1.0530).abs() < 5e-4, "{h}");
        assert_eq!(restricted_entropy(&WORKED, &ids(&[1])).unwrap(), 0.0);
        assert_eq!(restricted_entropy(&WORKED, &[]), Err(Error::DegenerateSupport));
    }

    #[test]
    fn point_mass_entropy_is_positive_zero() {
        let h = restricted_entropy(&WORKED, &ids(&[1])).unwrap();
        assert!(h == 0.0 && h.is_sign_positive());
        assert!(entropy(&[1.0, 0.0]).is_sign_positive());
    }

    #[test]
    fn uniform_entropy_is_log_k() {
        let p = [0.25; 4];
        let h = restricted_entropy(&p, &ids(&[0, 1, 2])).unwrap();
        assert!((h - 3f64.ln()).abs() < 1e-12);
        let b = entropy_bound_of(&p, &ids(&[0, 1, 2, 3])).unwrap();
        assert!((b.bound - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn worked_example_bound() {
        let s = ids(&[0, 1, 2]);
        let b = entropy_bound_of(&WORKED, &s).unwrap();
        assert!((b.cardinality - 1.0986).abs() < 1e-4);
        assert!(b.bound <= b.cardinality);
        assert!(restricted_entropy(&WORKED, &s).unwrap() <= b.bound + 1e-12);
    }

    #[test]
    fn density() {
        assert_eq!(density_of(1, 4), 0.25);
        assert_eq!(density_of(4, 4), 1.0);
        assert_eq!(density_of(0, 4), 0.0);
    }

    #[test]
    fn risk_functional() {
        let half = RiskPolicy::new(0.5).unwrap();
        assert!((risk(true, 0.9, half) - 0.05).abs() < 1e-12);
        assert_eq!(risk(false, 0.3, RiskPolicy::new(0.0).unwrap()), 1.0);
        assert_eq!(risk(true, 0.3, RiskPolicy::new(0.0).unwrap()), 0.0);
        assert!(RiskPolicy::new(1.5).is_err());
    }

    #[test]
    fn table_arithmetic() {
        let half = RiskPolicy::new(0.5).unwrap();
        let base = BenchmarkCounts::new(1000, 1000, 720, 0).unwrap();
        let tad = BenchmarkCounts::new(1000, 1000, 890, 0).unwrap();
        let abstain = BenchmarkCounts::new(1000, 920, 864, 80).unwrap();
        assert_eq!(benchmark_stats(&base, half, None).unwrap().accuracy, 0.72);
        let r = benchmark_stats(&tad, half, Some(&base)).unwrap();
        assert!((r.relative_gain.unwrap() - 0.236).abs() < 1e-3);
        assert!((r.error_reduction.unwrap() - 0.607).abs() < 1e-3);
        let a = benchmark_stats(&abstain, half, Some(&base)).unwrap();
        assert_eq!(a.coverage, 0.92);
        assert_eq!(a.accuracy, 0.864);
        assert_eq!(a.utility, 0.904);
        assert!((a.accuracy_given_answered.unwrap() - 0.9391).abs() < 1e-4);
    }

    #[test]
    fn counts_validation() {
        assert!(BenchmarkCounts::new(0, 0, 0, 0).is_err());
        assert!(BenchmarkCounts::new(10, 9, 5, 0).is_err());
        assert!(BenchmarkCounts::new(10, 5, 6, 5).is_err());
        let zero = BenchmarkCounts::new(10, 10, 0, 0).unwrap();
        let one = BenchmarkCounts::new(10, 10, 5, 0).unwrap();
        let perfect = BenchmarkCounts::new(10, 10, 10, 0).unwrap();
        let p = RiskPolicy::new(0.5).unwrap();
        assert!(matches!(benchmark_stats(&one, p, Some(&zero)), Err(Error::DivisionByZero(_))));
        assert!(matches!(benchmark_stats(&one, p, Some(&perfect)), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn logistic_and_auroc() {
        let scores = [0.1, 0.2, 0.3, 0.6, 0.8, 0.9];
        let labels = [false, false, true, false, true, true];
        let fit = fit_logistic(&scores, &labels, 5000, 1.0).unwrap();
        assert!(fit.b > 0.0);
        assert!(fit.predict(0.9) > fit.predict(0.1));
        assert!((auroc(&scores, &labels).unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(auroc(&scores, &[true; 6]), None);
    }
}
