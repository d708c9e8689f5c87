//! Concrete requests for abstract stimuli.
//!
//! | stimulus | request |
//! |---|---|
//! | `C_t` | create with initiator, invitee, variables `1..=V` |
//! | `C_f` | the same create without `invitee_id` |
//! | `J_t` / `J_f` | join as the invitee / as the uninvited client |
//! | `S_t` | initiator sends to the lowest variable whose shadow flag is 0 |
//! | `S_f` | the uninvited client sends |
//! | `R_t` | receive every shadow-flagged variable, or variable 1 if none |
//! | `R_f` | receive unknown variable 9999 |
//! | `E` | the invitee ends while both are present, else the initiator |
//!
//! Receives and `R_f` are issued by the invitee while both participants are
//! present, otherwise by the initiator.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use usecert_core::canonical::{Attr, CanonicalStateVector};

pub const UNKNOWN_VARIABLE: u64 = 9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BindingConfig {
    /// Number of variables declared by `C_t`.
    pub variables: u64,
    /// Element count of every variable.
    pub variable_size: u64,
}

impl Default for BindingConfig {
    fn default() -> Self {
        Self {
            variables: 64,
            variable_size: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("variable pool exhausted: all {0} variables hold unread data")]
    PoolExhausted(u64),
    #[error("no binding for stimulus `{0}`")]
    UnknownStimulus(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub path: &'static str,
    pub body: Value,
    /// Variable a send or receive targets, for shadow bookkeeping.
    pub variable: Option<u64>,
}

/// Per-test harness state: participant ids, the live session and the
/// expected flag table.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingContext {
    pub config: BindingConfig,
    pub initiator: String,
    pub invitee: String,
    pub uninvited: String,
    pub session_id: Option<String>,
    pub shadow: BTreeMap<u64, u8>,
}

impl BindingContext {
    /// Fresh participant ids derived from `test_id`, so tests never share
    /// sessions.
    pub fn new(test_id: usize, config: BindingConfig) -> Self {
        Self {
            config,
            initiator: format!("model_A_{test_id}"),
            invitee: format!("model_B_{test_id}"),
            uninvited: format!("model_X_{test_id}"),
            session_id: None,
            shadow: BTreeMap::new(),
        }
    }

    fn both_present(state: CanonicalStateVector) -> bool {
        state.joined == Attr::One && state.partial_end == Attr::Zero
    }

    fn session(&self) -> Value {
        json!(self.session_id.as_deref().unwrap_or(""))
    }

    fn payload(&self) -> Value {
        json!((0..self.config.variable_size)
            .map(|i| i as f64 + 0.5)
            .collect::<Vec<f64>>())
    }

    fn create_body(&self, with_invitee: bool) -> Value {
        let ids: Vec<u64> = (1..=self.config.variables).collect();
        let sizes = vec![self.config.variable_size; ids.len()];
        let mut body = json!({
            "initiator_id": self.initiator,
            "invitee_id": self.invitee,
            "variable_ids": ids,
            "variable_sizes": sizes,
        });
        if !with_invitee {
            body.as_object_mut().expect("object").remove("invitee_id");
        }
        body
    }

    /// Requests for `stimulus` issued from a state with canonical vector
    /// `state`.
    pub fn bind(&self, stimulus: &str, state: CanonicalStateVector) -> Result<Vec<Request>, BindError> {
        let both = Self::both_present(state);
        let receiver = if both { &self.invitee } else { &self.initiator };
        let one = |path, body, variable| Ok(vec![Request { path, body, variable }]);
        match stimulus {
            "C_t" => one("/create_session", self.create_body(true), None),
            "C_f" => one("/create_session", self.create_body(false), None),
            "J_t" => one(
                "/join_session",
                json!({"session_id": self.session(), "client_id": self.invitee}),
                None,
            ),
            "J_f" => one(
                "/join_session",
                json!({"session_id": self.session(), "client_id": self.uninvited}),
                None,
            ),
            "S_t" | "S_f" => {
                let var = (1..=self.config.variables)
                    .find(|v| self.shadow.get(v).copied().unwrap_or(0) == 0)
                    .ok_or(BindError::PoolExhausted(self.config.variables))?;
                let client = if stimulus == "S_t" {
                    &self.initiator
                } else {
                    &self.uninvited
                };
                let body = json!({"session_id": self.session(), "client_id": client, "var_id": var, "payload": self.payload()});
                one("/send_data", body, Some(var))
            }
            "R_t" => {
                let mut vars: Vec<u64> = self.shadow.iter().filter(|(_, f)| **f == 1).map(|(v, _)| *v).collect();
                if vars.is_empty() {
                    vars.push(1);
                }
                Ok(vars
                    .into_iter()
                    .map(|v| Request {
                        path: "/receive_data",
                        body: json!({"session_id": self.session(), "client_id": receiver, "var_id": v}),
                        variable: Some(v),
                    })
                    .collect())
            }
            "R_f" => one(
                "/receive_data",
                json!({"session_id": self.session(), "client_id": receiver, "var_id": UNKNOWN_VARIABLE}),
                Some(UNKNOWN_VARIABLE),
            ),
            "E" => {
                let client = if both { &self.invitee } else { &self.initiator };
                one(
                    "/end_session",
                    json!({"session_id": self.session(), "client_id": client}),
                    None,
                )
            }
            other => Err(BindError::UnknownStimulus(other.to_string())),
        }
    }

    /// Updates the live session and shadow flags from one observed reply.
    pub fn apply(&mut self, request: &Request, atoms: &[String], body: &Value) {
        let has = |a: &str| atoms.iter().any(|x| x == a);
        match request.path {
            "/create_session" => {
                if let Some(id) = body.get("session_id").and_then(Value::as_str) {
                    self.session_id = Some(id.to_string());
                    self.shadow = (1..=self.config.variables).map(|v| (v, 0)).collect();
                }
            }
            "/send_data" if has("uf(1)") => {
                if let Some(v) = request.variable {
                    self.shadow.insert(v, 1);
                }
            }
            "/receive_data" if has("uf(0)") => {
                if let Some(v) = request.variable {
                    self.shadow.insert(v, 0);
                }
            }
            "/end_session" if has("clear") => {
                self.session_id = None;
                self.shadow.clear();
            }
            _ => {}
        }
    }
}
