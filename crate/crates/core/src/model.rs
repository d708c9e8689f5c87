//! Usage-model data structures, probability filling and structural validation.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for every probability-mass comparison on a model.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// The marker for an illegal response; never allowed on a usage-model arc.
pub const ILLEGAL_MARKER: &str = "ω";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArcId(pub usize);

/// Short stimulus token such as `C_t` or `R_f`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StimulusLabel(String);

impl StimulusLabel {
    pub fn new(key: impl Into<String>) -> Result<Self, ModelError> {
        let key = key.into();
        if key.is_empty() || key.chars().any(|c| c.is_whitespace() || c == '"' || c == '\'') {
            return Err(ModelError::InvalidLabel(key));
        }
        Ok(Self(key))
    }

    pub fn key(&self) -> &str {
        &self.0
    }

    /// Base letter of a predicate-refined stimulus (`S` for `S_t`).
    pub fn base(&self) -> &str {
        self.0.split('_').next().unwrap_or(&self.0)
    }
}

impl fmt::Display for StimulusLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered list of response atoms, e.g. `s_a, store, uf(1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseLabel(Vec<String>);

impl ResponseLabel {
    pub fn new<I, S>(atoms: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let atoms: Vec<String> = atoms.into_iter().map(Into::into).collect();
        if atoms.is_empty() || atoms.iter().any(|a| a.is_empty() || a == ILLEGAL_MARKER) {
            return Err(ModelError::InvalidLabel(atoms.join(",")));
        }
        Ok(Self(atoms))
    }

    pub fn atoms(&self) -> &[String] {
        &self.0
    }

    pub fn contains(&self, atom: &str) -> bool {
        self.0.iter().any(|a| a == atom)
    }

    /// Order-insensitive comparison against observed atoms.
    pub fn matches(&self, observed: &[String]) -> bool {
        let mut expected: Vec<&str> = self.0.iter().map(String::as_str).collect();
        let mut observed: Vec<&str> = observed.iter().map(String::as_str).collect();
        expected.sort_unstable();
        observed.sort_unstable();
        expected == observed
    }

    /// True when the label consists only of error atoms (`*_e`).
    pub fn is_error(&self) -> bool {
        self.0.iter().all(|a| a.ends_with("_e"))
    }
}

impl fmt::Display for ResponseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: StateId,
    pub to: StateId,
    pub stimulus: StimulusLabel,
    pub response: ResponseLabel,
    /// Transition probability; zero for unannotated arcs until the model is filled.
    pub probability: f64,
    /// Whether the probability came from the source text.
    pub annotated: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unsupported construct: {construct}")]
    Unsupported {
        line: usize,
        column: usize,
        construct: String,
    },
    #[error("no source state")]
    NoSource,
    #[error("no sink state (declare `sink [name]` or target [Exit])")]
    NoSink,
    #[error("line {line}: more than one source state")]
    MultipleSources { line: usize },
    #[error("line {line}: state [{name}] declared twice")]
    DuplicateState { name: String, line: usize },
    #[error("state [{state}] has two arcs with stimulus {stimulus} (model must be deterministic)")]
    Nondeterministic { state: String, stimulus: String },
    #[error("line {line}, column {column}: unknown target state [{target}]")]
    UnknownTarget { target: String, line: usize, column: usize },
    #[error("line {line}, column {column}: probability {value} outside (0,1]")]
    ProbabilityOutOfRange { value: f64, line: usize, column: usize },
    #[error("sink [{0}] has outgoing arcs")]
    SinkHasArcs(String),
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("state id or arc endpoint out of range")]
    BadIndex,
    #[error("state [{state}]: annotated mass {annotated} leaves nothing for {unannotated} unannotated arc(s)")]
    NoResidualMass {
        state: String,
        annotated: f64,
        unannotated: usize,
    },
    #[error("state [{state}]: outgoing probabilities sum to {mass}, expected 1")]
    RowMass { state: String, mass: f64 },
}

/// Probability-weighted Mealy machine with a unique source and sink.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageModel {
    name: String,
    states: Vec<String>,
    source: StateId,
    sink: StateId,
    arcs: Vec<Arc>,
    fill_directive: Option<f64>,
    // outgoing arcs per state, ordered by stimulus key
    outgoing: Vec<Vec<ArcId>>,
    index: HashMap<String, StateId>,
}

impl UsageModel {
    /// Builds a model, enforcing the structural invariants that do not depend
    /// on probabilities: endpoints in range, a silent sink and determinism.
    /// Arcs are stored ordered by (source state, stimulus key).
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        source: StateId,
        sink: StateId,
        arcs: Vec<Arc>,
        fill_directive: Option<f64>,
    ) -> Result<Self, ModelError> {
        let mut arcs = arcs;
        arcs.sort_by(|a, b| (a.from, &a.stimulus).cmp(&(b.from, &b.stimulus)));
        let n = states.len();
        if source.0 >= n || sink.0 >= n || arcs.iter().any(|a| a.from.0 >= n || a.to.0 >= n) {
            return Err(ModelError::BadIndex);
        }
        let mut index = HashMap::with_capacity(n);
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), StateId(i)).is_some() {
                return Err(ModelError::DuplicateState {
                    name: s.clone(),
                    line: 0,
                });
            }
        }
        let mut outgoing = vec![Vec::new(); n];
        for (i, arc) in arcs.iter().enumerate() {
            if arc.from == sink {
                return Err(ModelError::SinkHasArcs(states[sink.0].clone()));
            }
            outgoing[arc.from.0].push(ArcId(i));
        }
        for (s, out) in outgoing.iter_mut().enumerate() {
            out.sort_by(|a, b| arcs[a.0].stimulus.cmp(&arcs[b.0].stimulus));
            if let Some(w) = out.windows(2).find(|w| arcs[w[0].0].stimulus == arcs[w[1].0].stimulus) {
                return Err(ModelError::Nondeterministic {
                    state: states[s].clone(),
                    stimulus: arcs[w[0].0].stimulus.to_string(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            states,
            source,
            sink,
            arcs,
            fill_directive,
            outgoing,
            index,
        })
    }

    /// Parses model-language text and fills unannotated probabilities.
    pub fn from_tml(text: &str) -> Result<Self, ModelError> {
        crate::tml::parse_model(text)?.fill_probabilities()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.states[id.0]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn source(&self) -> StateId {
        self.source
    }

    pub fn sink(&self) -> StateId {
        self.sink
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc_ids(&self) -> impl Iterator<Item = ArcId> {
        (0..self.arcs.len()).map(ArcId)
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    pub fn fill_directive(&self) -> Option<f64> {
        self.fill_directive
    }

    /// Outgoing arcs of `state`, ordered by stimulus key.
    pub fn outgoing(&self, state: StateId) -> &[ArcId] {
        &self.outgoing[state.0]
    }

    pub fn find_arc(&self, state: StateId, stimulus: &str) -> Option<ArcId> {
        self.outgoing[state.0]
            .iter()
            .copied()
            .find(|&a| self.arcs[a.0].stimulus.key() == stimulus)
    }

    /// Human-readable arc name, `from --stim/resp--> to`.
    pub fn arc_label(&self, id: ArcId) -> String {
        let a = self.arc(id);
        format!(
            "[{}] {}/{} [{}]",
            self.state_name(a.from),
            a.stimulus,
            a.response,
            self.state_name(a.to)
        )
    }

    /// Assigns each unannotated arc an equal share of the residual mass of its
    /// state. Annotated values are already normalized by the fill mass.
    pub fn fill_probabilities(&self) -> Result<UsageModel, ModelError> {
        let mut arcs = self.arcs.clone();
        for s in self.state_ids() {
            if s == self.sink {
                continue;
            }
            let out = &self.outgoing[s.0];
            let annotated: f64 = out
                .iter()
                .filter(|a| arcs[a.0].annotated)
                .map(|a| arcs[a.0].probability)
                .sum();
            let unannotated = out.iter().filter(|a| !arcs[a.0].annotated).count();
            if unannotated == 0 {
                if (annotated - 1.0).abs() > MASS_TOLERANCE {
                    return Err(ModelError::RowMass {
                        state: self.state_name(s).to_string(),
                        mass: annotated,
                    });
                }
                continue;
            }
            let residual = 1.0 - annotated;
            if residual <= MASS_TOLERANCE {
                return Err(ModelError::NoResidualMass {
                    state: self.state_name(s).to_string(),
                    annotated,
                    unannotated,
                });
            }
            let share = residual / unannotated as f64;
            for a in out {
                if !arcs[a.0].annotated {
                    arcs[a.0].probability = share;
                }
            }
        }
        let mut filled = self.clone();
        filled.arcs = arcs;
        Ok(filled)
    }

    /// States reachable from `start` following arcs forward (or backward).
    fn reach(&self, start: StateId, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([start]);
        seen[start.0] = true;
        while let Some(s) = queue.pop_front() {
            for a in &self.arcs {
                let (x, y) = if forward { (a.from, a.to) } else { (a.to, a.from) };
                if x == s && !seen[y.0] {
                    seen[y.0] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// Checks every stochastic and reachability invariant. An empty list means
    /// the model is fit for analysis and generation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, a) in self.arcs.iter().enumerate() {
            if !(a.probability > 0.0 && a.probability <= 1.0) {
                out.push(Violation::new(
                    Rule::ArcProbability,
                    format!("arc {} has probability {}", self.arc_label(ArcId(i)), a.probability),
                ));
            }
        }
        for s in self.state_ids() {
            if s == self.sink {
                continue;
            }
            let out_arcs = &self.outgoing[s.0];
            if out_arcs.is_empty() {
                out.push(Violation::new(
                    Rule::RowMass,
                    format!("state {} has no outgoing arcs", self.state_name(s)),
                ));
                continue;
            }
            let mass: f64 = out_arcs.iter().map(|a| self.arcs[a.0].probability).sum();
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                out.push(Violation::new(
                    Rule::RowMass,
                    format!("state {} outgoing probabilities sum to {mass}", self.state_name(s)),
                ));
            }
        }
        let from_source = self.reach(self.source, true);
        let to_sink = self.reach(self.sink, false);
        for s in self.state_ids() {
            if !from_source[s.0] {
                out.push(Violation::new(
                    Rule::Unreachable,
                    format!("state {} unreachable from source", self.state_name(s)),
                ));
            }
            if !to_sink[s.0] {
                out.push(Violation::new(
                    Rule::SinkUnreachable,
                    format!("sink unreachable from {}", self.state_name(s)),
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ArcProbability,
    RowMass,
    Unreachable,
    SinkUnreachable,
    CanonicalMissing,
    CanonicalInjective,
    CanonicalSemantics,
}

/// A broken model invariant, reported as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
}

impl Violation {
    pub fn new(rule: Rule, message: String) -> Self {
        Self { rule, message }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
