//! Analytic performance accounting: CPI, throughput, Amdahl speedup,
//! oracle-complexity estimates and pipeline bottlenecks.

use serde::{Deserialize, Serialize};

use crate::decoder::{mean, DecodeResult};
use crate::error::{Error, Result};

/// Per-token cycle budget. Cycles are abstract units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpiParams {
    pub cpi0: f64,
    pub h_kb: f64,
    pub c_hit: f64,
    pub c_miss: f64,
    #[serde(default)]
    pub c_agents: f64,
    #[serde(default = "default_clock")]
    pub clock_hz: f64,
}

fn default_clock() -> f64 {
    2.5e9
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and non-negative, got {v}")))
    }
}

fn unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl CpiParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("cpi0", self.cpi0)?;
        unit("h_kb", self.h_kb)?;
        non_negative("c_hit", self.c_hit)?;
        non_negative("c_miss", self.c_miss)?;
        non_negative("c_agents", self.c_agents)?;
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::validation("clock_hz", format!("must be positive, got {}", self.clock_hz)));
        }
        Ok(())
    }
}

/// Cycles per token without the agent cohort.
pub fn c_tad(p: &CpiParams) -> f64 {
    p.cpi0 + p.h_kb * p.c_hit + (1.0 - p.h_kb) * p.c_miss
}

pub fn cpi(p: &CpiParams) -> f64 {
    c_tad(p) + p.c_agents
}

/// Tokens per second at `clock_hz`.
pub fn throughput(p: &CpiParams) -> Result<f64> {
    let c = cpi(p);
    if c == 0.0 {
        return Err(Error::DivisionByZero("cycles per token"));
    }
    Ok(p.clock_hz / c)
}

/// Overall speedup when a fraction `f` of the work is accelerated by `s`.
pub fn amdahl(f: f64, s: f64) -> f64 {
    1.0 / ((1.0 - f) + f / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    pub vocab_size: u64,
    pub horizon: u64,
    /// Seconds per oracle call.
    pub oracle_cost: f64,
    pub delta_avg: f64,
    #[serde(default = "one")]
    pub batch_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl ComplexityParams {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.horizon == 0 {
            return Err(Error::validation("vocab_size/horizon", "must be positive"));
        }
        if !(self.oracle_cost.is_finite() && self.oracle_cost > 0.0) {
            return Err(Error::validation("oracle_cost", "must be positive"));
        }
        if !(self.delta_avg > 0.0 && self.delta_avg <= 1.0) {
            return Err(Error::validation("delta_avg", format!("must lie in (0, 1], got {}", self.delta_avg)));
        }
        if !(self.batch_factor.is_finite() && self.batch_factor >= 1.0) {
            return Err(Error::validation("batch_factor", format!("must be at least 1, got {}", self.batch_factor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub naive_seconds: f64,
    pub pruned_seconds: f64,
    pub speedup: f64,
}

pub fn complexity_estimate(p: &ComplexityParams) -> ComplexityEstimate {
    let calls = p.horizon as f64 * p.vocab_size as f64;
    ComplexityEstimate {
        naive_seconds: calls * p.oracle_cost,
        pruned_seconds: calls * p.delta_avg * (p.oracle_cost / p.batch_factor),
        speedup: p.batch_factor / p.delta_avg,
    }
}

/// Service times in seconds, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineStages {
    pub lm: f64,
    pub fv: f64,
    pub mr: f64,
    pub cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    pub stage: String,
    pub service_time: f64,
    pub throughput: f64,
}

pub fn pipeline_bottleneck(s: &PipelineStages) -> Result<Bottleneck> {
    let stages = [("LM", s.lm), ("FV", s.fv), ("MR", s.mr), ("CM", s.cm)];
    for (name, t) in stages {
        non_negative(name, t)?;
    }
    let (stage, service_time) = stages
        .into_iter()
        .fold(stages[0], |best, cur| if cur.1 > best.1 { cur } else { best });
    if service_time == 0.0 {
        return Err(Error::AllZero);
    }
    Ok(Bottleneck {
        stage: stage.to_string(),
        service_time,
        throughput: 1.0 / service_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredProfile {
    pub runs: usize,
    pub steps: usize,
    pub delta_avg: f64,
    pub queries_per_token: f64,
    /// Oracle queries over `steps · |V|`.
    pub query_fraction: f64,
    /// Mean cost of each agent over guarded steps, in cohort order.
    pub agent_mean_costs: Vec<f64>,
    pub c_tad: f64,
    pub c_agents: f64,
    pub modeled_cpi: f64,
    pub agents_measured: bool,
}

/// Fold decode runs into empirical density, query load and a modeled CPI.
///
/// When the runs carry agent costs their per-agent means replace
/// `p.c_agents`; otherwise the configured value is kept.
pub fn measured_profile(results: &[DecodeResult], vocab_len: usize, p: &CpiParams) -> Result<MeasuredProfile> {
    p.validate()?;
    if results.is_empty() {
        return Err(Error::validation("results", "at least one decode run is required"));
    }
    if vocab_len == 0 {
        return Err(Error::validation("vocab_len", "must be positive"));
    }
    let steps: Vec<_> = results.iter().flat_map(|r| &r.steps).collect();
    let delta_avg = mean(steps.iter().map(|s| s.density)).unwrap_or(0.0);
    let queries: u64 = steps.iter().map(|s| s.oracle_queries).sum();
    let n = steps.len().max(1) as f64;
    let costed: Vec<&Vec<f64>> = steps.iter().map(|s| &s.agent_costs).filter(|c| !c.is_empty()).collect();
    let width = costed.iter().map(|c| c.len()).max().unwrap_or(0);
    let agent_mean_costs: Vec<f64> = (0..width)
        .map(|i| mean(costed.iter().filter_map(|c| c.get(i).copied())).unwrap_or(0.0))
        .collect();
    let agents_measured = !agent_mean_costs.is_empty();
    let c_agents = if agents_measured {
        agent_mean_costs.iter().sum()
    } else {
        p.c_agents
    };
    let tad = c_tad(p);
    Ok(MeasuredProfile {
        runs: results.len(),
        steps: steps.len(),
        delta_avg,
        queries_per_token: queries as f64 / n,
        query_fraction: queries as f64 / (n * vocab_len as f64),
        agent_mean_costs,
        c_tad: tad,
        c_agents,
        modeled_cpi: tad + c_agents,
        agents_measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c_hit: f64, c_agents: f64) -> CpiParams {
        CpiParams {
            cpi0: 3.0,
            h_kb: 0.8,
            c_hit,
            c_miss: 3.0,
            c_agents,
            clock_hz: 2.5e9,
        }
    }

    #[test]
    fn cpi_and_throughput() {
        let base = params(0.4, 0.6);
        let cached = params(0.1, 0.3);
        assert!((cpi(&base) - 4.52).abs() < 1e-12);
        assert!((cpi(&cached) - 3.98).abs() < 1e-12);
        let t0 = throughput(&base).unwrap();
        let t1 = throughput(&cached).unwrap();
        assert!((t0 / 1e6 - 553.097).abs() < 1e-3);
        assert!((t1 / 1e6 - 628.141).abs() < 1e-3);
        assert!((t1 / t0 - 1.14).abs() < 0.005);
        let zero = CpiParams {
            cpi0: 0.0,
            h_kb: 1.0,
            c_hit: 0.0,
            c_miss: 0.0,
            c_agents: 0.0,
            clock_hz: 1.0,
        };
        assert_eq!(throughput(&zero), Err(Error::DivisionByZero("cycles per token")));
        assert!(params(0.4, -1.0).validate().is_err());
    }

    #[test]
    fn amdahl_values() {
        assert!((amdahl(0.35, 2.0) - 1.0 / 0.825).abs() < 1e-12);
        assert!((amdahl(0.35, 3.0) - 1.304_347_826).abs() < 1e-9);
        assert_eq!(amdahl(0.7, 1.0), 1.0);
        assert!((amdahl(0.35, 1e9) - 1.0 / 0.65).abs() < 1e-6);
    }

    #[test]
    fn complexity_example() {
        let naive = ComplexityParams {
            vocab_size: 50_000,
            horizon: 128,
            oracle_cost: 40e-6,
            delta_avg: 1.0,
            batch_factor: 1.0,
        };
        let e = complexity_estimate(&naive);
        assert!((e.naive_seconds - 256.0).abs() < 1e-9);
        assert_eq!(e.speedup, 1.0);
        let pruned = ComplexityParams {
            delta_avg: 0.12,
            batch_factor: 4.0,
            ..naive
        };
        let e = complexity_estimate(&pruned);
        assert!((e.pruned_seconds - 7.68).abs() < 1e-9);
        assert!((e.speedup - 33.333_333).abs() < 1e-5);
        assert!(ComplexityParams { delta_avg: 0.0, ..naive }.validate().is_err());
    }

    #[test]
    fn bottleneck() {
        let b = |lm, fv, mr, cm| pipeline_bottleneck(&PipelineStages { lm, fv, mr, cm });
        let r = b(4.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((r.stage.as_str(), r.throughput), ("LM", 0.25));
        assert_eq!(b(2.0, 2.0, 2.0, 2.0).unwrap().stage, "LM");
        assert_eq!(b(1.0, 3.0, 1.0, 1.0).unwrap().stage, "FV");
        assert_eq!(b(0.0, 0.0, 0.0, 0.0), Err(Error::AllZero));
    }
}
