//! Test records and certification statistics.
//!
//! Single use reliability composes per-arc reliabilities through the chain:
//! each arc's reliability is the posterior mean `(s + 1) / (s + f + 2)` of a
//! uniform Beta prior updated with its successes and failures, and `R(s)`,
//! the probability that a use continuing from state `s` succeeds, solves
//! `R(sink) = 1`, `R(s) = Σ p(a) r(a) R(target(a))`.
//!
//! Kullback discrimination measures how far the tested arc frequencies are
//! from the usage model: `K = Σ_s π_s Σ_a p(a) log2(p(a) / t(a))` with
//! occupancy `π` and Laplace-smoothed tested frequencies `t`. The relative
//! value divides by `K` of an untested record.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalStateVector;
use crate::linalg::{Matrix, SingularError};
use crate::markov::ChainStatistics;
use crate::model::{ArcId, UsageModel};
use crate::suite::SuiteMeta;
use crate::testgen::{Method, TestCase};

pub const RECORD_FORMAT: &str = "usecert-record/1";
pub const REPORT_FORMAT: &str = "usecert-report/1";

pub const SUR_ESTIMATOR: &str =
    "per-arc Beta(1,1) posterior mean (s+1)/(s+f+2) composed through the usage chain from source to sink";
pub const KULLBACK_ESTIMATOR: &str = "occupancy-weighted log2 discrimination of Laplace-smoothed tested arc frequencies from usage probabilities; relative = 100 * K / K(untested)";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcOutcomeCounter {
    pub successes: u64,
    pub continue_failures: u64,
    pub stop_failures: u64,
}

impl ArcOutcomeCounter {
    pub fn failures(&self) -> u64 {
        self.continue_failures + self.stop_failures
    }

    pub fn executed(&self) -> u64 {
        self.successes + self.failures()
    }

    pub fn record(&mut self, outcome: StepOutcome) {
        match outcome {
            StepOutcome::Pass => self.successes += 1,
            StepOutcome::ContinueFailure => self.continue_failures += 1,
            StepOutcome::StopFailure => self.stop_failures += 1,
        }
    }
}

/// Posterior mean reliability of an arc under a uniform prior.
pub fn arc_reliability(successes: u64, failures: u64) -> f64 {
    (successes as f64 + 1.0) / ((successes + failures) as f64 + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Pass,
    ContinueFailure,
    StopFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Continue,
    Stop,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::Continue => "continue",
            FailureKind::Stop => "stop",
        })
    }
}

/// One executed step as evaluated by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    /// 1-based position in the test case.
    pub step: usize,
    pub stimulus: String,
    pub outcome: StepOutcome,
    pub expected_response: Vec<String>,
    /// Response atoms of every request the stimulus was bound to.
    pub observed_responses: Vec<Vec<String>>,
    pub expected_state: CanonicalStateVector,
    pub observed_state: Option<CanonicalStateVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub id: usize,
    pub method: Method,
    pub generated: usize,
    pub executed: usize,
    pub steps: Vec<StepLog>,
    /// Set when the harness itself could not continue (not a system failure).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harness_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TestVerdict {
    Pass,
    Fail { step: usize, kind: FailureKind },
    HarnessError { step: usize, message: String },
}

impl TestResult {
    /// First failing step, classified as a stop failure when the test was cut
    /// short by one.
    pub fn verdict(&self) -> TestVerdict {
        let first = self.steps.iter().find(|s| s.outcome != StepOutcome::Pass);
        match first {
            Some(s) => {
                let stopped = self.steps.iter().any(|s| s.outcome == StepOutcome::StopFailure);
                TestVerdict::Fail {
                    step: s.step,
                    kind: if stopped {
                        FailureKind::Stop
                    } else {
                        FailureKind::Continue
                    },
                }
            }
            None => match &self.harness_error {
                Some(m) => TestVerdict::HarnessError {
                    step: self.executed + 1,
                    message: m.clone(),
                },
                None => TestVerdict::Pass,
            },
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self.verdict(), TestVerdict::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub from: String,
    pub stimulus: String,
    pub response: String,
    pub to: String,
    pub generated: u64,
    #[serde(flatten)]
    pub counter: ArcOutcomeCounter,
}

/// Accumulated outcomes of a suite run. Arcs are kept in model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub format: String,
    pub model: String,
    pub suite: Option<SuiteMeta>,
    pub arcs: Vec<ArcRecord>,
    pub tests: Vec<TestResult>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub generated_stimuli: u64,
    pub executed_stimuli: u64,
    pub failed_stimuli: u64,
    pub tests: u64,
    pub passed_tests: u64,
    pub failed_tests: u64,
    pub stopped_tests: u64,
    pub harness_errors: u64,
}

impl TestRecord {
    pub fn new(model: &UsageModel, suite: Option<SuiteMeta>) -> Self {
        let arcs = model
            .arc_ids()
            .map(|a| {
                let arc = model.arc(a);
                ArcRecord {
                    from: model.state_name(arc.from).to_string(),
                    stimulus: arc.stimulus.to_string(),
                    response: arc.response.to_string(),
                    to: model.state_name(arc.to).to_string(),
                    generated: 0,
                    counter: ArcOutcomeCounter::default(),
                }
            })
            .collect();
        Self {
            format: RECORD_FORMAT.to_string(),
            model: model.name().to_string(),
            suite,
            arcs,
            tests: Vec::new(),
        }
    }

    /// Adds one executed test. Steps past `result.executed` count as
    /// generated but not executed.
    pub fn add(&mut self, case: &TestCase, result: TestResult) -> Result<(), String> {
        if result.steps.len() != result.executed || result.executed > case.steps.len() {
            return Err(format!("test {}: inconsistent step accounting", case.id));
        }
        for (log, step) in result.steps.iter().zip(&case.steps) {
            if log.stimulus != step.stimulus.key() {
                return Err(format!(
                    "test {}, step {}: log does not match the case",
                    case.id, log.step
                ));
            }
        }
        for step in &case.steps {
            self.arcs[step.arc.0].generated += 1;
        }
        for (log, step) in result.steps.iter().zip(&case.steps) {
            self.arcs[step.arc.0].counter.record(log.outcome);
        }
        self.tests.push(result);
        Ok(())
    }

    pub fn counter(&self, arc: ArcId) -> ArcOutcomeCounter {
        self.arcs[arc.0].counter
    }

    pub fn counters(&self) -> Vec<ArcOutcomeCounter> {
        self.arcs.iter().map(|a| a.counter).collect()
    }

    pub fn totals(&self) -> Totals {
        let mut t = Totals {
            tests: self.tests.len() as u64,
            ..Totals::default()
        };
        for a in &self.arcs {
            t.generated_stimuli += a.generated;
            t.executed_stimuli += a.counter.executed();
            t.failed_stimuli += a.counter.failures();
        }
        for r in &self.tests {
            match r.verdict() {
                TestVerdict::Pass => t.passed_tests += 1,
                TestVerdict::Fail { kind, .. } => {
                    t.failed_tests += 1;
                    if kind == FailureKind::Stop {
                        t.stopped_tests += 1;
                    }
                }
                TestVerdict::HarnessError { .. } => t.harness_errors += 1,
            }
        }
        t
    }

    /// Confirms a loaded record describes exactly the arcs of `model`.
    pub fn check_against(&self, model: &UsageModel) -> Result<(), String> {
        if self.format != RECORD_FORMAT {
            return Err(format!("record format `{}` is not {RECORD_FORMAT}", self.format));
        }
        if self.arcs.len() != model.arcs().len() {
            return Err(format!(
                "record has {} arcs, model `{}` has {}",
                self.arcs.len(),
                model.name(),
                model.arcs().len()
            ));
        }
        for (a, rec) in model.arc_ids().zip(&self.arcs) {
            let arc = model.arc(a);
            if rec.from != model.state_name(arc.from)
                || rec.stimulus != arc.stimulus.key()
                || rec.to != model.state_name(arc.to)
            {
                return Err(format!(
                    "record arc {rec:?} does not match model arc {}",
                    model.arc_label(a)
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Single use reliability from explicit per-arc counters (model arc order).
pub fn sur_from_counters(model: &UsageModel, counters: &[ArcOutcomeCounter]) -> Result<f64, SingularError> {
    let n = model.state_count();
    let sink = model.sink().0;
    let transient: Vec<usize> = (0..n).filter(|&s| s != sink).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in transient.iter().enumerate() {
        pos[s] = k;
    }
    let m = transient.len();
    let mut a = Matrix::identity(m);
    let mut b = vec![0.0; m];
    for id in model.arc_ids() {
        let arc = model.arc(id);
        let c = counters[id.0];
        let w = arc.probability * arc_reliability(c.successes, c.failures());
        if arc.to.0 == sink {
            b[pos[arc.from.0]] += w;
        } else {
            a[(pos[arc.from.0], pos[arc.to.0])] -= w;
        }
    }
    let r = a.solve(&b)?;
    Ok(r[pos[model.source().0]])
}

pub fn single_use_reliability(model: &UsageModel, record: &TestRecord) -> Result<f64, SingularError> {
    sur_from_counters(model, &record.counters())
}

/// Kullback discrimination (bits) of tested traversal counts from the model,
/// weighted by the occupancy vector `pi`.
pub fn kullback_from_counts(model: &UsageModel, pi: &[f64], executed: &[u64]) -> f64 {
    let mut k = 0.0;
    for s in model.state_ids() {
        let out = model.outgoing(s);
        if out.is_empty() {
            continue;
        }
        let total: u64 = out.iter().map(|a| executed[a.0]).sum();
        let denom = total as f64 + out.len() as f64;
        let row: f64 = out
            .iter()
            .map(|&a| {
                let u = model.arc(a).probability;
                let t = (executed[a.0] as f64 + 1.0) / denom;
                u * (u / t).log2()
            })
            .sum();
        k += pi[s.0] * row;
    }
    k
}

pub fn kullback_discrimination(model: &UsageModel, pi: &[f64], record: &TestRecord) -> f64 {
    let executed: Vec<u64> = record.arcs.iter().map(|a| a.counter.executed()).collect();
    kullback_from_counts(model, pi, &executed)
}

/// `100 * K(record) / K(untested)`, or 0 when an untested record already
/// matches the model.
pub fn relative_kullback_from_counts(model: &UsageModel, pi: &[f64], executed: &[u64]) -> f64 {
    let baseline = kullback_from_counts(model, pi, &vec![0; executed.len()]);
    if baseline <= 0.0 {
        return 0.0;
    }
    100.0 * kullback_from_counts(model, pi, executed) / baseline
}

pub fn relative_kullback(model: &UsageModel, pi: &[f64], record: &TestRecord) -> f64 {
    let executed: Vec<u64> = record.arcs.iter().map(|a| a.counter.executed()).collect();
    relative_kullback_from_counts(model, pi, &executed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub stimulus: String,
    pub response: String,
    pub generated: u64,
    pub executed: u64,
    pub failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcReliabilityRow {
    pub from: String,
    pub stimulus: String,
    pub response: String,
    pub to: String,
    pub successes: u64,
    pub failures: u64,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub test: usize,
    pub step: usize,
    pub stimulus: String,
    pub kind: FailureKind,
    /// Model state the step was issued from.
    pub prior_state: String,
    /// Up to four stimuli ending with the failing one.
    pub fragment: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimators {
    pub single_use_reliability: String,
    pub kullback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub format: String,
    pub model: String,
    pub estimators: Estimators,
    pub rows: Vec<ResponseRow>,
    pub totals: Totals,
    pub single_use_reliability: f64,
    pub kullback_bits: f64,
    pub relative_kullback_percent: f64,
    pub arcs: Vec<ArcReliabilityRow>,
    pub failures: Vec<FailureEntry>,
}

/// Builds the certification report. Rows are ordered by stimulus key, then
/// response.
pub fn render_report(
    model: &UsageModel,
    record: &TestRecord,
    stats: &ChainStatistics,
) -> Result<CertificationReport, SingularError> {
    let mut grouped: BTreeMap<(String, String), ResponseRow> = BTreeMap::new();
    for a in &record.arcs {
        let row = grouped
            .entry((a.stimulus.clone(), a.response.clone()))
            .or_insert_with(|| ResponseRow {
                stimulus: a.stimulus.clone(),
                response: a.response.clone(),
                generated: 0,
                executed: 0,
                failed: 0,
            });
        row.generated += a.generated;
        row.executed += a.counter.executed();
        row.failed += a.counter.failures();
    }
    let arcs = record
        .arcs
        .iter()
        .map(|a| ArcReliabilityRow {
            from: a.from.clone(),
            stimulus: a.stimulus.clone(),
            response: a.response.clone(),
            to: a.to.clone(),
            successes: a.counter.successes,
            failures: a.counter.failures(),
            reliability: arc_reliability(a.counter.successes, a.counter.failures()),
        })
        .collect();

    let mut failures = Vec::new();
    for t in &record.tests {
        let mut state = model.source();
        for (i, log) in t.steps.iter().enumerate() {
            if log.outcome != StepOutcome::Pass {
                let lo = i.saturating_sub(3);
                failures.push(FailureEntry {
                    test: t.id,
                    step: log.step,
                    stimulus: log.stimulus.clone(),
                    kind: if log.outcome == StepOutcome::StopFailure {
                        FailureKind::Stop
                    } else {
                        FailureKind::Continue
                    },
                    prior_state: model.state_name(state).to_string(),
                    fragment: t.steps[lo..=i].iter().map(|s| s.stimulus.clone()).collect(),
                });
            }
            match model.find_arc(state, &log.stimulus) {
                Some(a) => state = model.arc(a).to,
                None => break,
            }
        }
    }

    Ok(CertificationReport {
        format: REPORT_FORMAT.to_string(),
        model: model.name().to_string(),
        estimators: Estimators {
            single_use_reliability: SUR_ESTIMATOR.to_string(),
            kullback: KULLBACK_ESTIMATOR.to_string(),
        },
        rows: grouped.into_values().collect(),
        totals: record.totals(),
        single_use_reliability: single_use_reliability(model, record)?,
        kullback_bits: kullback_discrimination(model, &stats.occupancy, record),
        relative_kullback_percent: relative_kullback(model, &stats.occupancy, record),
        arcs,
        failures,
    })
}

impl CertificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Certification report: {}\n", self.model);
        let _ = writeln!(
            out,
            "{:<28} {:>10} {:>10} {:>8}",
            "Stimulus/Response", "Generated", "Executed", "Failed"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<28} {:>10} {:>10} {:>8}",
                format!("{}/{}", r.stimulus, r.response),
                r.generated,
                r.executed,
                r.failed
            );
        }
        let t = &self.totals;
        let _ = writeln!(
            out,
            "{:<28} {:>10} {:>10} {:>8}",
            "Total stimuli", t.generated_stimuli, t.executed_stimuli, t.failed_stimuli
        );
        let _ = writeln!(
            out,
            "{:<28} {:>10} {:>10} {:>8}\n",
            "Total tests", t.tests, t.tests, t.failed_tests
        );
        let _ = writeln!(out, "Passed tests:                     {}", t.passed_tests);
        let _ = writeln!(out, "Stopped tests:                    {}", t.stopped_tests);
        if t.harness_errors > 0 {
            let _ = writeln!(out, "Harness errors:                   {}", t.harness_errors);
        }
        let _ = writeln!(
            out,
            "Single use reliability:           {:.9}",
            self.single_use_reliability
        );
        let _ = writeln!(out, "Kullback discrimination (bits):   {:.9e}", self.kullback_bits);
        let _ = writeln!(
            out,
            "Relative Kullback discrimination: {:.9e} %",
            self.relative_kullback_percent
        );
        let _ = writeln!(out, "\nSUR estimator: {}", self.estimators.single_use_reliability);
        let _ = writeln!(out, "Kullback estimator: {}", self.estimators.kullback);

        let _ = writeln!(out, "\nArc reliabilities");
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "  {:<12} {:<26} -> {:<12} s={:<7} f={:<5} r={:.6}",
                a.from,
                format!("{}/{}", a.stimulus, a.response),
                a.to,
                a.successes,
                a.failures,
                a.reliability
            );
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "\nFailures ({})", self.failures.len());
            for f in &self.failures {
                let _ = writeln!(
                    out,
                    "  test {:>5} step {:>3} {:<4} {:<8} from {:<12} fragment {}",
                    f.test,
                    f.step,
                    f.stimulus,
                    f.kind,
                    f.prior_state,
                    f.fragment.concat()
                );
            }
        }
        out
    }
}
