//! Scenario documents: parsing, validation, compilation and the bundled
//! golden set.

mod bundled;
mod report;
mod verify;

pub use bundled::{bundled, bundled_names, BUNDLED};
pub use report::{
    perf_tables, run_compiled, run_scenario, write_outputs, Discrepancy, GoldenCheck, MetricsSummary, PerfReport, RunOutcome, RunReport,
    StepView, VerdictLine,
};
pub use verify::{verify_scenario, CheckLine, CheckStatus, VerifyOptions, VerifyReport};

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentRef, Annotation, FactualVerifier, MathReasoner, OracleAgent, ReasonerRuleSpec, StepResult, AgentOracle, CohortOracle};
use crate::decoder::{DecodeStatus, Goal, ScriptStep, ScriptedRetriever};
use crate::error::{Error, Result};
use crate::kb::{Claim, ClaimTable, KbSpec, KnowledgeBase, RuleSet, RuleSpec, Verdict};
use crate::model::{ModelSpec, ScoringModel};
use crate::oracle::{KbOracle, Oracle, RuleOracle};
use crate::perf::{ComplexityParams, CpiParams, PipelineStages};
use crate::types::{Trace, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// `w` is safe iff the scenario KB admits `x ∥ w`.
    #[default]
    KbBacked,
    Table {
        rules: Vec<RuleSpec>,
        #[serde(default = "allow")]
        default: Verdict,
    },
    /// The cohort's joint constraint as an oracle.
    Cohort,
    /// One declared agent's acceptance predicate.
    Agent { name: String },
}

fn allow() -> Verdict {
    Verdict::Allow
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Oracle {
        name: String,
        oracle: OracleSpec,
        #[serde(default)]
        cost: f64,
    },
    /// Checks the scenario's claim table against the KB facts.
    Factual {
        name: String,
        #[serde(default)]
        cost: f64,
    },
    Reasoner {
        name: String,
        rules: Vec<ReasonerRuleSpec>,
        #[serde(default = "unknown")]
        default: StepResult,
        #[serde(default)]
        cost: f64,
    },
    Monitor {
        name: String,
        #[serde(default)]
        annotations: BTreeMap<String, Annotation>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        topic: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tense: Option<String>,
        #[serde(default)]
        cost: f64,
    },
}

fn unknown() -> StepResult {
    StepResult::Unknown
}

impl AgentSpec {
    pub fn name(&self) -> &str {
        match self {
            AgentSpec::Oracle { name, .. }
            | AgentSpec::Factual { name, .. }
            | AgentSpec::Reasoner { name, .. }
            | AgentSpec::Monitor { name, .. } => name,
        }
    }

    fn cost(&self) -> f64 {
        match self {
            AgentSpec::Oracle { cost, .. }
            | AgentSpec::Factual { cost, .. }
            | AgentSpec::Reasoner { cost, .. }
            | AgentSpec::Monitor { cost, .. } => *cost,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Tad,
    Guarded,
    Abstain,
    Proof,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSpec {
    #[serde(default)]
    pub mode: Mode,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<String>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "two")]
    pub retry_budget: usize,
    #[serde(default = "half")]
    pub omega: f64,
    #[serde(default = "yes")]
    pub caching: bool,
}

fn two() -> usize {
    2
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpiCase {
    pub label: String,
    pub params: CpiParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityCase {
    pub label: String,
    pub params: ComplexityParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmdahlCase {
    pub f: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cpi: Vec<CpiCase>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub complexity: Vec<ComplexityCase>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub amdahl: Vec<AmdahlCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineStages>,
    /// Base parameters for the profile measured from this scenario's run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<CpiParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    SafeMass,
    SemanticEntropy,
    Density,
    Cpi,
    Throughput,
    Amdahl,
    ComplexityNaive,
    ComplexityPruned,
    ComplexitySpeedup,
}

/// A value printed in the source material, compared with the value this
/// run derives. `at` is a 1-based step for decode quantities and a 0-based
/// case index for perf quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub quantity: Quantity,
    #[serde(default)]
    pub at: usize,
    pub printed: f64,
    /// Half-width of the printed precision.
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<DecodeStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub vocabulary: Vec<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub kb: KbSpec,
    /// Claim carried by each token surface.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub claims: BTreeMap<String, Claim>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentSpec>,
    pub decode: DecodeSpec,
    /// Glob over rule surfaces a finished proof must match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    /// Scripted retrieval answers keyed by 1-based step.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub retriever: BTreeMap<usize, Vec<ScriptStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perf: Option<PerfSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

fn at(field: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let field = field.into();
    move |e| match e {
        Error::Validation { field: inner, message } => Error::Validation {
            field: format!("{field}.{inner}"),
            message,
        },
        other => Error::validation(field, other.to_string()),
    }
}

fn unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl PerfSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.cpi.iter().enumerate() {
            c.params.validate().map_err(at(format!("cpi[{i}]")))?;
        }
        for (i, c) in self.complexity.iter().enumerate() {
            c.params.validate().map_err(at(format!("complexity[{i}]")))?;
        }
        for (i, a) in self.amdahl.iter().enumerate() {
            unit(&format!("amdahl[{i}].f"), a.f)?;
            if a.s.is_nan() || a.s < 1.0 {
                return Err(Error::validation(format!("amdahl[{i}].s"), "must be at least 1"));
            }
        }
        if let Some(m) = &self.measured {
            m.validate().map_err(at("measured"))?;
        }
        Ok(())
    }
}

/// Everything a scenario needs at run time.
pub struct Compiled {
    pub scenario: Scenario,
    pub vocab: Vocabulary,
    pub model: ScoringModel,
    pub kb: Arc<KnowledgeBase>,
    pub claims: ClaimTable,
    pub oracle: Arc<dyn Oracle>,
    pub agents: Vec<AgentRef>,
    pub initial: Trace,
    pub goal: Option<Goal>,
}

impl std::fmt::Debug for Compiled {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Compiled")
            .field("scenario", &self.scenario.name)
            .field("vocab", &self.vocab)
            .field("agents", &self.agents.len())
            .field("initial", &self.initial)
            .finish_non_exhaustive()
    }
}

impl Compiled {
    pub fn retriever(&self) -> ScriptedRetriever {
        ScriptedRetriever::new(self.scenario.retriever.iter().map(|(&k, v)| (k, v.clone())))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    pub fn compile(&self) -> Result<Compiled> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        let vocab = Vocabulary::new(&self.vocabulary).map_err(at("vocabulary"))?;
        let model = self.model.build(&vocab).map_err(at("model"))?;

        let mut claims = ClaimTable::new();
        for (surface, claim) in &self.claims {
            let id = vocab.id(surface).map_err(at(format!("claims.{surface}")))?;
            claims.insert(id, claim.clone());
        }
        let kb = Arc::new(self.kb.build(&vocab, &claims).map_err(at("kb"))?);

        let d = &self.decode;
        unit("decode.tau", d.tau)?;
        unit("decode.omega", d.omega)?;
        let initial = vocab.trace(&d.initial).map_err(at("decode.initial"))?;

        let mut agents: Vec<AgentRef> = Vec::new();
        for (i, spec) in self.agents.iter().enumerate() {
            let field = format!("agents[{i}]");
            if !(spec.cost().is_finite() && spec.cost() >= 0.0) {
                return Err(Error::validation(format!("{field}.cost"), "must be finite and non-negative"));
            }
            if self.agents[..i].iter().any(|a| a.name() == spec.name()) {
                return Err(Error::validation(format!("{field}.name"), format!("duplicate agent {}", spec.name())));
            }
            agents.push(self.build_agent(spec, &vocab, &kb, &claims).map_err(at(field))?);
        }

        let oracle = self
            .build_oracle(&self.oracle, &vocab, &kb, &agents)
            .map_err(at("oracle"))?;

        let goal = match (&self.goal, d.mode) {
            (Some(g), _) => Some(Goal::parse(g, &vocab).map_err(at("goal"))?),
            (None, Mode::Proof) => return Err(Error::validation("goal", "proof mode needs a goal pattern")),
            (None, _) => None,
        };
        if d.mode == Mode::Guarded && agents.is_empty() {
            return Err(Error::validation("agents", "guarded mode needs at least one agent"));
        }
        if d.mode == Mode::Proof && !initial.is_empty() {
            return Err(Error::validation("decode.initial", "proof search starts from the empty proof"));
        }
        if let Some(perf) = &self.perf {
            perf.validate().map_err(at("perf"))?;
        }
        for (i, r) in self.references.iter().enumerate() {
            if r.tolerance.is_nan() || r.tolerance < 0.0 {
                return Err(Error::validation(format!("references[{i}].tolerance"), "must be non-negative"));
            }
        }
        if let Some(trace) = self.expected.as_ref().and_then(|e| e.trace.as_ref()) {
            vocab.trace(trace).map_err(at("expected.trace"))?;
        }
        Ok(Compiled {
            scenario: self.clone(),
            vocab,
            model,
            kb,
            claims,
            oracle,
            agents,
            initial,
            goal,
        })
    }

    fn build_oracle(&self, spec: &OracleSpec, vocab: &Vocabulary, kb: &Arc<KnowledgeBase>, agents: &[AgentRef]) -> Result<Arc<dyn Oracle>> {
        Ok(match spec {
            OracleSpec::KbBacked => Arc::new(KbOracle::new(kb.clone())),
            OracleSpec::Table { rules, default } => Arc::new(RuleOracle(RuleSet::compile(rules, *default, vocab)?)),
            OracleSpec::Cohort => {
                if agents.is_empty() {
                    return Err(Error::validation("kind", "cohort oracle needs agents"));
                }
                Arc::new(CohortOracle::new(agents.to_vec()))
            }
            OracleSpec::Agent { name } => {
                let agent = agents
                    .iter()
                    .find(|a| a.name() == name)
                    .ok_or_else(|| Error::validation("name", format!("no agent named {name}")))?;
                Arc::new(AgentOracle(agent.clone()))
            }
        })
    }

    fn build_agent(&self, spec: &AgentSpec, vocab: &Vocabulary, kb: &Arc<KnowledgeBase>, claims: &ClaimTable) -> Result<AgentRef> {
        Ok(match spec {
            AgentSpec::Oracle { name, oracle, cost } => {
                if matches!(oracle, OracleSpec::Cohort | OracleSpec::Agent { .. }) {
                    return Err(Error::validation("oracle", "agents wrap table or kb-backed oracles only"));
                }
                let o = self.build_oracle(oracle, vocab, kb, &[])?;
                Arc::new(OracleAgent::new(name.clone(), o, *cost))
            }
            AgentSpec::Factual { name, cost } => {
                Arc::new(FactualVerifier::new(name.clone(), claims.clone(), kb.facts().to_vec(), *cost))
            }
            AgentSpec::Reasoner {
                name,
                rules,
                default,
                cost,
            } => Arc::new(MathReasoner::new(name.clone(), vocab.clone(), rules, *default, *cost)?),
            AgentSpec::Monitor {
                name,
                annotations,
                topic,
                tense,
                cost,
            } => {
                let mut table = HashMap::new();
                for (surface, ann) in annotations {
                    let id = vocab.id(surface).map_err(|e| Error::validation(format!("annotations.{surface}"), e.to_string()))?;
                    table.insert(id, ann.clone());
                }
                Arc::new(crate::agents::ContextMonitor::new(name.clone(), table, topic.clone(), tense.clone(), *cost))
            }
        })
    }
}
