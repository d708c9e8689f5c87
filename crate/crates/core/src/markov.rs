//! Standard Markov analysis of a usage model.
//!
//! Two views of the same chain are used. For long-run occupancy the sink is
//! joined back to the source by an implicit arc of probability 1, making the
//! chain recurrent. For per-test quantities the sink is absorbing and the
//! expected visits come from the fundamental matrix `N = (I - Q)^-1`, where
//! `Q` is the transition matrix restricted to the non-sink states.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, SingularError};
use crate::model::UsageModel;

/// Maximum tolerated `|πP - π|` component.
pub const STATIONARY_RESIDUAL: f64 = 1e-9;

/// Transition matrix of the recurrent chain (sink → source with probability 1).
pub fn recurrent_transition_matrix(model: &UsageModel) -> Matrix {
    let mut p = Matrix::zeros(model.state_count());
    for arc in model.arcs() {
        p[(arc.from.0, arc.to.0)] += arc.probability;
    }
    p[(model.sink().0, model.source().0)] = 1.0;
    p
}

/// Long-run fraction of steps spent in each state, indexed by `StateId`.
pub fn stationary_distribution(model: &UsageModel) -> Result<Vec<f64>, SingularError> {
    let n = model.state_count();
    let p = recurrent_transition_matrix(model);
    // (P^T - I) π = 0, with the last equation replaced by Σπ = 1
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let pi = a.solve(&b)?;
    let residual = stationary_residual(&p, &pi);
    if !residual.is_finite() || residual > STATIONARY_RESIDUAL {
        return Err(SingularError {
            column: n - 1,
            pivot: 0.0,
            ratio: residual,
        });
    }
    Ok(pi)
}

/// `max_j |(πP)_j - π_j|`.
pub fn stationary_residual(p: &Matrix, pi: &[f64]) -> f64 {
    let n = p.size();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| pi[i] * p[(i, j)]).sum();
            (flow - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Expected number of visits to each state during one test (one walk from
/// source to sink). The sink is visited exactly once.
pub fn expected_state_visits(model: &UsageModel) -> Result<Vec<f64>, SingularError> {
    let n = model.state_count();
    let sink = model.sink().0;
    // transient states keep their relative order, sink removed
    let transient: Vec<usize> = (0..n).filter(|&s| s != sink).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in transient.iter().enumerate() {
        pos[s] = k;
    }
    let m = transient.len();
    // v (I - Q) = e_source  <=>  (I - Q)^T v^T = e_source^T
    let mut a = Matrix::identity(m);
    for arc in model.arcs() {
        if arc.to.0 != sink {
            a[(pos[arc.to.0], pos[arc.from.0])] -= arc.probability;
        }
    }
    let mut b = vec![0.0; m];
    b[pos[model.source().0]] = 1.0;
    let v = a.solve(&b)?;
    let mut visits = vec![0.0; n];
    for (k, &s) in transient.iter().enumerate() {
        visits[s] = v[k];
    }
    visits[sink] = 1.0;
    Ok(visits)
}

/// Expected number of stimuli per test.
pub fn expected_test_length(model: &UsageModel) -> Result<f64, SingularError> {
    Ok(ChainStatistics::analyze(model)?.expected_length)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStatistics {
    /// Stationary probability per state.
    pub occupancy: Vec<f64>,
    /// Expected visits per test per state.
    pub state_occurrence: Vec<f64>,
    /// Expected traversals per test per arc.
    pub arc_occurrence: Vec<f64>,
    pub expected_length: f64,
}

impl ChainStatistics {
    pub fn analyze(model: &UsageModel) -> Result<Self, SingularError> {
        let occupancy = stationary_distribution(model)?;
        let state_occurrence = expected_state_visits(model)?;
        let arc_occurrence: Vec<f64> = model
            .arcs()
            .iter()
            .map(|a| state_occurrence[a.from.0] * a.probability)
            .collect();
        let expected_length = arc_occurrence.iter().sum();
        Ok(Self {
            occupancy,
            state_occurrence,
            arc_occurrence,
            expected_length,
        })
    }

    pub fn report(&self, model: &UsageModel) -> AnalysisReport {
        AnalysisReport {
            model: model.name().to_string(),
            expected_length: self.expected_length,
            states: model
                .state_ids()
                .map(|s| StateStatistics {
                    state: model.state_name(s).to_string(),
                    occupancy: self.occupancy[s.0],
                    occurrence: self.state_occurrence[s.0],
                })
                .collect(),
            arcs: model
                .arc_ids()
                .map(|a| {
                    let arc = model.arc(a);
                    ArcStatistics {
                        from: model.state_name(arc.from).to_string(),
                        stimulus: arc.stimulus.to_string(),
                        response: arc.response.to_string(),
                        to: model.state_name(arc.to).to_string(),
                        probability: arc.probability,
                        occurrence: self.arc_occurrence[a.0],
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStatistics {
    pub state: String,
    pub occupancy: f64,
    pub occurrence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcStatistics {
    pub from: String,
    pub stimulus: String,
    pub response: String,
    pub to: String,
    pub probability: f64,
    pub occurrence: f64,
}

/// Machine-readable analysis output of the `analyze` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: String,
    pub expected_length: f64,
    pub states: Vec<StateStatistics>,
    pub arcs: Vec<ArcStatistics>,
}

impl AnalysisReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Model analysis: {}", self.model);
        let _ = writeln!(out, "Expected test length: {:.6} stimuli\n", self.expected_length);
        let _ = writeln!(out, "{:<14} {:>12} {:>12}", "State", "Occupancy", "Occurrence");
        for s in &self.states {
            let _ = writeln!(out, "{:<14} {:>12.6} {:>12.6}", s.state, s.occupancy, s.occurrence);
        }
        let _ = writeln!(
            out,
            "\n{:<14} {:<28} {:<14} {:>11} {:>12}",
            "From", "Stimulus/Response", "To", "Probability", "Occurrence"
        );
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "{:<14} {:<28} {:<14} {:>11.6} {:>12.6}",
                a.from,
                format!("{}/{}", a.stimulus, a.response),
                a.to,
                a.probability,
                a.occurrence
            );
        }
        out
    }
}
