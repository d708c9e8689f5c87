//! Test-case generation from a usage model: random sampling, weighted
//! (most probable path) sampling and minimum-coverage sampling.

mod coverage;
mod random;
mod weighted;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ArcId, ResponseLabel, StateId, StimulusLabel, UsageModel};

pub use coverage::generate_min_coverage;
pub use random::{generate_random, Prng, PRNG_ALGORITHM, WALK_CAP};
pub use weighted::{generate_weighted, generate_weighted_with_caps, WeightedCaps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Weighted,
    MinCoverage,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Random => "random",
            Method::Weighted => "weighted",
            Method::MinCoverage => "min_coverage",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestStep {
    pub arc: ArcId,
    pub stimulus: StimulusLabel,
    pub expected_response: ResponseLabel,
    pub expected_state: StateId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: usize,
    pub method: Method,
    /// Seed of the random stream that produced the case, if any.
    pub seed: Option<u64>,
    pub steps: Vec<TestStep>,
    pub path_probability: f64,
}

impl TestCase {
    pub fn from_arcs(model: &UsageModel, id: usize, method: Method, seed: Option<u64>, arcs: &[ArcId]) -> Self {
        let steps = arcs
            .iter()
            .map(|&a| {
                let arc = model.arc(a);
                TestStep {
                    arc: a,
                    stimulus: arc.stimulus.clone(),
                    expected_response: arc.response.clone(),
                    expected_state: arc.to,
                }
            })
            .collect();
        let path_probability = arcs.iter().map(|&a| model.arc(a).probability).product();
        Self {
            id,
            method,
            seed,
            steps,
            path_probability,
        }
    }

    /// Rebuilds a case from its stimulus keys by walking the model.
    pub fn from_stimuli(
        model: &UsageModel,
        id: usize,
        method: Method,
        seed: Option<u64>,
        stimuli: &[impl AsRef<str>],
    ) -> Result<Self, String> {
        let mut state = model.source();
        let mut arcs = Vec::with_capacity(stimuli.len());
        for (i, k) in stimuli.iter().enumerate() {
            let k = k.as_ref();
            let a = model.find_arc(state, k).ok_or_else(|| {
                format!(
                    "test {id}, step {}: stimulus {k} is not legal in state {}",
                    i + 1,
                    model.state_name(state)
                )
            })?;
            arcs.push(a);
            state = model.arc(a).to;
        }
        let case = Self::from_arcs(model, id, method, seed, &arcs);
        case.check(model)?;
        Ok(case)
    }

    pub fn arcs(&self) -> impl Iterator<Item = ArcId> + '_ {
        self.steps.iter().map(|s| s.arc)
    }

    pub fn stimuli(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.stimulus.key()).collect()
    }

    /// Structural invariants: starts at the source, chains, ends at the sink.
    pub fn check(&self, model: &UsageModel) -> Result<(), String> {
        let mut state = model.source();
        if self.steps.is_empty() {
            return Err(format!("test {} is empty", self.id));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let arc = model.arc(step.arc);
            if arc.from != state {
                return Err(format!(
                    "test {}, step {}: does not continue from {}",
                    self.id,
                    i + 1,
                    model.state_name(state)
                ));
            }
            if step.expected_state != arc.to || step.stimulus != arc.stimulus || step.expected_response != arc.response
            {
                return Err(format!("test {}, step {}: disagrees with its arc", self.id, i + 1));
            }
            if arc.to == model.sink() && i + 1 != self.steps.len() {
                return Err(format!("test {}, step {}: reaches the sink early", self.id, i + 1));
            }
            state = arc.to;
        }
        if state != model.sink() {
            return Err(format!("test {} does not end at the sink", self.id));
        }
        if !(self.path_probability > 0.0 && self.path_probability <= 1.0) {
            return Err(format!(
                "test {} has path probability {}",
                self.id, self.path_probability
            ));
        }
        Ok(())
    }
}

/// Cases plus any non-fatal diagnostics from a generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub cases: Vec<TestCase>,
    pub warnings: Vec<String>,
}
