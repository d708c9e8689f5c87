use std::collections::BTreeMap;

use serde_json::{json, Value};
use usecert_core::canonical::{CanonicalStateVector, CanonicalTable};
use usecert_core::certify::{StepLog, StepOutcome, TestRecord, TestResult};
use usecert_core::suite::Suite;
use usecert_core::{TestCase, TestStep, UsageModel};

use crate::binding::{BindError, BindingConfig, BindingContext};
use crate::transport::{Transport, TransportError};

/// Server state as read back after a stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub vector: CanonicalStateVector,
    pub flags: BTreeMap<u64, u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepExecution {
    /// Response atoms of each request, in order.
    pub responses: Vec<Vec<String>>,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Binding(#[from] BindError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

fn atoms(body: &Value) -> Vec<String> {
    body.get("response")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

/// Reads the session status; no live session or a 404 is the no-session
/// vector.
pub fn observe(ctx: &BindingContext, transport: &dyn Transport) -> Result<Observation, TransportError> {
    let none = Observation {
        vector: CanonicalStateVector::NO_SESSION,
        flags: BTreeMap::new(),
    };
    let Some(id) = &ctx.session_id else {
        return Ok(none);
    };
    let r = transport.get(&format!("/sessions/{id}"))?;
    match r.status {
        404 => Ok(none),
        200 => {
            let bit = |k: &str| match r.body.get(k).and_then(Value::as_u64) {
                Some(v @ (0 | 1)) => Ok(v == 1),
                _ => Err(TransportError::Protocol(format!(
                    "status field `{k}` missing or not 0/1"
                ))),
            };
            let mut flags = BTreeMap::new();
            if let Some(m) = r.body.get("flags").and_then(Value::as_object) {
                for (k, v) in m {
                    let (Ok(var), Some(f)) = (k.parse::<u64>(), v.as_u64()) else {
                        return Err(TransportError::Protocol(format!("bad flag entry {k}: {v}")));
                    };
                    flags.insert(var, f as u8);
                }
            }
            let data_sent = flags.values().any(|&f| f == 1);
            Ok(Observation {
                vector: CanonicalStateVector::observed(bit("joined")?, data_sent, bit("partial_end")?),
                flags,
            })
        }
        s => Err(TransportError::Protocol(format!("status request answered {s}"))),
    }
}

/// Issues the requests bound to `stimulus` and reads back the state.
pub fn execute_step(
    ctx: &mut BindingContext,
    stimulus: &str,
    state: CanonicalStateVector,
    transport: &dyn Transport,
) -> Result<StepExecution, StepError> {
    let requests = ctx.bind(stimulus, state)?;
    let mut responses = Vec::with_capacity(requests.len());
    for req in &requests {
        let r = transport.post(req.path, &req.body)?;
        let a = atoms(&r.body);
        ctx.apply(req, &a, &r.body);
        responses.push(a);
    }
    let observation = observe(ctx, transport)?;
    Ok(StepExecution { responses, observation })
}

/// Oracle: every reply carries the expected atoms and the server is in the
/// expected canonical state.
pub fn check_step(step: &TestStep, expected: CanonicalStateVector, exec: &StepExecution) -> bool {
    !exec.responses.is_empty()
        && exec.responses.iter().all(|r| step.expected_response.matches(r))
        && exec.observation.vector == expected
}

/// A failing step stops the test when the observed state is not the
/// expected one and the next stimulus cannot be applied from it.
pub fn classify_failure(
    model: &UsageModel,
    table: &CanonicalTable,
    step: &TestStep,
    observed: CanonicalStateVector,
    next: Option<&TestStep>,
) -> StepOutcome {
    let Some(next) = next else {
        return StepOutcome::ContinueFailure;
    };
    match table.identify(model, observed) {
        Some(s) if s == step.expected_state => StepOutcome::ContinueFailure,
        Some(s) if model.find_arc(s, next.stimulus.key()).is_some() => StepOutcome::ContinueFailure,
        _ => StepOutcome::StopFailure,
    }
}

fn expected_vector(model: &UsageModel, table: &CanonicalTable, step: &TestStep) -> CanonicalStateVector {
    table
        .expected(model, step.expected_state)
        .expect("canonical table covers every state (checked before execution)")
}

/// Runs one test case. Only an unreachable server is an error; every other
/// problem is recorded in the result.
pub fn execute_test_case(
    model: &UsageModel,
    table: &CanonicalTable,
    case: &TestCase,
    transport: &dyn Transport,
    binding: BindingConfig,
) -> Result<TestResult, TransportError> {
    let mut ctx = BindingContext::new(case.id, binding);
    let mut state = table
        .expected(model, model.source())
        .expect("source has a canonical vector");
    let mut result = TestResult {
        id: case.id,
        method: case.method,
        generated: case.steps.len(),
        executed: 0,
        steps: Vec::new(),
        harness_error: None,
    };
    for (i, step) in case.steps.iter().enumerate() {
        let expected = expected_vector(model, table, step);
        let mut log = StepLog {
            step: i + 1,
            stimulus: step.stimulus.key().to_string(),
            outcome: StepOutcome::Pass,
            expected_response: step.expected_response.atoms().to_vec(),
            observed_responses: Vec::new(),
            expected_state: expected,
            observed_state: None,
            cause: None,
        };
        match execute_step(&mut ctx, step.stimulus.key(), state, transport) {
            Err(StepError::Binding(e)) => {
                result.harness_error = Some(e.to_string());
                break;
            }
            Err(StepError::Transport(e)) => {
                if matches!(e, TransportError::Unreachable(_)) {
                    return Err(e);
                }
                log.outcome = StepOutcome::StopFailure;
                log.cause = Some(e.cause());
            }
            Ok(exec) => {
                if !check_step(step, expected, &exec) {
                    log.outcome = classify_failure(model, table, step, exec.observation.vector, case.steps.get(i + 1));
                }
                log.observed_responses = exec.responses;
                log.observed_state = Some(exec.observation.vector);
            }
        }
        let stop = log.outcome == StepOutcome::StopFailure;
        result.steps.push(log);
        result.executed += 1;
        if stop {
            break;
        }
        state = expected;
    }
    cleanup(&ctx, transport);
    Ok(result)
}

/// Ends a session left open by a failed test so it does not accumulate.
fn cleanup(ctx: &BindingContext, transport: &dyn Transport) {
    if let Some(id) = &ctx.session_id {
        for client in [&ctx.invitee, &ctx.initiator] {
            let _ = transport.post("/end_session", &json!({"session_id": id, "client_id": client}));
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub binding: BindingConfig,
    /// Keep the results gathered so far if the server becomes unreachable.
    pub keep_partial: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("canonical table is incomplete: {0}")]
    Table(String),
    #[error("{error} (after {completed} tests)")]
    Unreachable {
        error: TransportError,
        completed: usize,
        partial: Option<Box<TestRecord>>,
    },
}

/// Clears server sessions if the reset endpoint is enabled. Returns whether
/// it was.
pub fn reset_server(transport: &dyn Transport) -> Result<bool, TransportError> {
    Ok(transport.post("/reset", &json!({}))?.status == 200)
}

/// Runs every case of `suite` in order and accumulates the record.
pub fn execute_suite(
    suite: &Suite,
    model: &UsageModel,
    table: &CanonicalTable,
    transport: &dyn Transport,
    options: RunOptions,
) -> Result<TestRecord, RunError> {
    if let Some(s) = model.state_ids().find(|&s| table.expected(model, s).is_none()) {
        return Err(RunError::Table(format!("no vector for state {}", model.state_name(s))));
    }
    let mut record = TestRecord::new(model, Some(suite.meta.clone()));
    let unreachable = |error, record: TestRecord, completed| RunError::Unreachable {
        error,
        completed,
        partial: options.keep_partial.then(|| Box::new(record)),
    };
    if let Err(e) = reset_server(transport) {
        return Err(unreachable(e, record, 0));
    }
    for (done, case) in suite.cases.iter().enumerate() {
        match execute_test_case(model, table, case, transport, options.binding) {
            Ok(result) => record.add(case, result).expect("result built from this case"),
            Err(e) => return Err(unreachable(e, record, done)),
        }
    }
    Ok(record)
}
