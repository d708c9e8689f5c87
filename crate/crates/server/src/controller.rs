//! Session store and request handling, independent of the HTTP layer.
//!
//! Every response body carries a `response` list of atoms naming what the
//! server did (`c_s`, `c_a`, `s_a`, `store`, `uf(1)`, ...) or the error it
//! reported (`c_e`, `j_e`, ...).

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde_json::{json, Map, Value};

use crate::faults::FaultConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Invitee,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub flag: u8,
    pub size: u64,
    pub data: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub initiator_id: Option<String>,
    pub invitee_id: Option<String>,
    pub invitee_joined: bool,
    pub partial_end: bool,
    pub departed: Option<Role>,
    pub variables: BTreeMap<u64, Variable>,
    deleted: bool,
}

impl Session {
    fn present(&self, client: &str) -> Option<Role> {
        if self.departed != Some(Role::Initiator) && self.initiator_id.as_deref() == Some(client) {
            return Some(Role::Initiator);
        }
        if self.invitee_present() && self.invitee_id.as_deref() == Some(client) {
            return Some(Role::Invitee);
        }
        None
    }

    fn invitee_present(&self) -> bool {
        self.invitee_joined && self.departed != Some(Role::Invitee)
    }

    fn present_count(&self) -> usize {
        usize::from(self.departed != Some(Role::Initiator)) + usize::from(self.invitee_present())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    BadRequest,
    Forbidden,
    NotFound,
    Conflict,
}

impl Status {
    pub fn code(self) -> u16 {
        match self {
            Status::Ok => 200,
            Status::BadRequest => 400,
            Status::Forbidden => 403,
            Status::NotFound => 404,
            Status::Conflict => 409,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: Status,
    pub body: Value,
}

impl Reply {
    fn ok(atoms: &[&str], mut extra: Map<String, Value>) -> Self {
        extra.insert("response".into(), json!(atoms));
        Self {
            status: Status::Ok,
            body: Value::Object(extra),
        }
    }

    fn error(status: Status, atom: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "response": [atom], "error": message.into() }),
        }
    }
}

/// Typed access to a JSON object body. Missing fields are `None`; present
/// fields of the wrong type are an error.
struct Body(Map<String, Value>);

impl Body {
    fn parse(bytes: &[u8]) -> Result<Self, String> {
        match serde_json::from_slice::<Value>(bytes) {
            Ok(Value::Object(m)) => Ok(Body(m)),
            Ok(_) => Err("request body must be a JSON object".into()),
            Err(e) => Err(format!("malformed JSON body: {e}")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(format!("`{key}` must be a string")),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| format!("`{key}` must be a non-negative integer")),
        }
    }

    fn uints(&self, key: &str) -> Result<Option<Vec<u64>>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_u64()
                        .ok_or_else(|| format!("`{key}` must hold non-negative integers"))
                })
                .collect::<Result<_, _>>()
                .map(Some),
            Some(_) => Err(format!("`{key}` must be a list")),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| format!("`{key}` must hold numbers")))
                .collect::<Result<_, _>>()
                .map(Some),
            Some(_) => Err(format!("`{key}` must be a list")),
        }
    }
}

pub struct Controller {
    faults: FaultConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

macro_rules! field {
    ($atom:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(msg) => return Reply::error(Status::BadRequest, $atom, msg),
        }
    };
}

impl Controller {
    pub fn new(faults: FaultConfig) -> Self {
        Self {
            faults,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn faults(&self) -> FaultConfig {
        self.faults
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    /// Routes one request. `reset_enabled` exposes `POST /reset`.
    pub fn dispatch(&self, method: &str, path: &str, body: &[u8], reset_enabled: bool) -> Reply {
        match (method, path) {
            ("POST", "/create_session") => self.with_body(body, "c_e", |b| self.create_session(b)),
            ("POST", "/join_session") => self.with_body(body, "j_e", |b| self.join_session(b)),
            ("POST", "/send_data") => self.with_body(body, "s_e", |b| self.send_data(b)),
            ("POST", "/receive_data") => self.with_body(body, "r_e", |b| self.receive_data(b)),
            ("POST", "/end_session") => self.with_body(body, "e_e", |b| self.end_session(b)),
            ("POST", "/reset") if reset_enabled => {
                let cleared = self.reset();
                Reply {
                    status: Status::Ok,
                    body: json!({ "cleared": cleared }),
                }
            }
            ("GET", p) if p.starts_with("/sessions/") => self.session_status(&p["/sessions/".len()..]),
            _ => Reply {
                status: Status::NotFound,
                body: json!({ "error": format!("no route for {method} {path}") }),
            },
        }
    }

    fn with_body(&self, bytes: &[u8], atom: &str, f: impl FnOnce(&Body) -> Reply) -> Reply {
        match Body::parse(bytes) {
            Ok(b) => f(&b),
            Err(msg) => Reply::error(Status::BadRequest, atom, msg),
        }
    }

    fn lookup(&self, id: Option<&str>) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().unwrap().get(id?).cloned()
    }

    fn create_session(&self, b: &Body) -> Reply {
        const E: &str = "c_e";
        let initiator = field!(E, b.string("initiator_id"));
        let invitee = field!(E, b.string("invitee_id"));
        let ids = field!(E, b.uints("variable_ids"));
        let sizes = field!(E, b.uints("variable_sizes"));
        if !self.faults.bug_create_skips_validation {
            let missing: Vec<&str> = [
                ("initiator_id", initiator.is_none()),
                ("invitee_id", invitee.is_none()),
                ("variable_ids", ids.is_none()),
                ("variable_sizes", sizes.is_none()),
            ]
            .iter()
            .filter(|(_, m)| *m)
            .map(|(k, _)| *k)
            .collect();
            if !missing.is_empty() {
                return Reply::error(Status::BadRequest, E, format!("missing fields: {}", missing.join(", ")));
            }
        }
        // only reachable with the validation fault: a missing list declares
        // no variables
        let (ids_given, ids, sizes) = match (ids, sizes) {
            (Some(i), Some(s)) => (true, i, s),
            _ => (false, Vec::new(), Vec::new()),
        };
        if ids.len() != sizes.len() {
            return Reply::error(
                Status::BadRequest,
                E,
                "variable_ids and variable_sizes differ in length",
            );
        }
        if ids_given && ids.is_empty() {
            return Reply::error(Status::BadRequest, E, "variable list is empty");
        }
        if sizes.contains(&0) {
            return Reply::error(Status::BadRequest, E, "variable sizes must be positive");
        }
        let mut variables = BTreeMap::new();
        for (&id, &size) in ids.iter().zip(&sizes) {
            if variables
                .insert(
                    id,
                    Variable {
                        flag: 0,
                        size,
                        data: None,
                    },
                )
                .is_some()
            {
                return Reply::error(Status::BadRequest, E, format!("duplicate variable id {id}"));
            }
        }
        let session = Session {
            initiator_id: initiator,
            invitee_id: invitee,
            invitee_joined: false,
            partial_end: false,
            departed: None,
            variables,
            deleted: false,
        };
        let id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        self.sessions
            .write()
            .unwrap()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        let mut extra = Map::new();
        extra.insert("session_id".into(), json!(id));
        Reply::ok(&["c_s", "c_a"], extra)
    }

    fn join_session(&self, b: &Body) -> Reply {
        const E: &str = "j_e";
        let id = field!(E, b.string("session_id"));
        let client = field!(E, b.string("client_id"));
        let Some(client) = client else {
            return Reply::error(Status::BadRequest, E, "missing field: client_id");
        };
        let Some(cell) = self.lookup(id.as_deref()) else {
            return Reply::error(Status::NotFound, E, "unknown session");
        };
        let mut s = cell.lock().unwrap();
        if s.deleted {
            return Reply::error(Status::NotFound, E, "unknown session");
        }
        if s.invitee_id.as_deref() != Some(client.as_str()) {
            return Reply::error(Status::Forbidden, E, "client is not the invitee of this session");
        }
        if s.partial_end && !self.faults.bug_join_after_partial_end {
            return Reply::error(Status::Conflict, E, "a participant has ended this session");
        }
        if s.invitee_present() {
            return Reply::error(Status::Conflict, E, "invitee already joined");
        }
        s.invitee_joined = true;
        if s.departed == Some(Role::Invitee) {
            s.departed = None;
            s.partial_end = false;
        }
        Reply::ok(&["j_a"], Map::new())
    }

    fn send_data(&self, b: &Body) -> Reply {
        const E: &str = "s_e";
        let id = field!(E, b.string("session_id"));
        let client = field!(E, b.string("client_id"));
        let var = field!(E, b.uint("var_id"));
        let payload = field!(E, b.floats("payload"));
        let (Some(client), Some(var), Some(payload)) = (client, var, payload) else {
            return Reply::error(Status::BadRequest, E, "client_id, var_id and payload are required");
        };
        let Some(cell) = self.lookup(id.as_deref()) else {
            return Reply::error(Status::NotFound, E, "unknown session");
        };
        let mut s = cell.lock().unwrap();
        if s.deleted {
            return Reply::error(Status::NotFound, E, "unknown session");
        }
        if s.present(&client).is_none() {
            return Reply::error(Status::Forbidden, E, "client is not in this session");
        }
        let Some(v) = s.variables.get_mut(&var) else {
            return Reply::error(Status::NotFound, E, format!("unknown variable {var}"));
        };
        if payload.len() as u64 != v.size {
            return Reply::error(
                Status::BadRequest,
                E,
                format!(
                    "payload has {} elements, variable {var} holds {}",
                    payload.len(),
                    v.size
                ),
            );
        }
        if v.flag == 1 {
            return Reply::error(Status::Conflict, E, format!("variable {var} already holds unread data"));
        }
        v.data = Some(payload);
        v.flag = 1;
        Reply::ok(&["s_a", "store", "uf(1)"], Map::new())
    }

    fn receive_data(&self, b: &Body) -> Reply {
        const E: &str = "r_e";
        let id = field!(E, b.string("session_id"));
        let client = field!(E, b.string("client_id"));
        let var = field!(E, b.uint("var_id"));
        let (Some(client), Some(var)) = (client, var) else {
            return Reply::error(Status::BadRequest, E, "client_id and var_id are required");
        };
        let Some(cell) = self.lookup(id.as_deref()) else {
            return Reply::error(Status::NotFound, E, "unknown session");
        };
        let mut s = cell.lock().unwrap();
        if s.deleted {
            return Reply::error(Status::NotFound, E, "unknown session");
        }
        if s.present(&client).is_none() {
            return Reply::error(Status::Forbidden, E, "client is not in this session");
        }
        let Some(v) = s.variables.get_mut(&var) else {
            return Reply::error(Status::NotFound, E, format!("unknown variable {var}"));
        };
        let payload = if self.faults.bug_receive_ignores_flag {
            v.data.clone()
        } else if v.flag == 1 {
            v.data.take()
        } else {
            None
        };
        let Some(payload) = payload else {
            return Reply::error(Status::Conflict, E, format!("no data available for variable {var}"));
        };
        v.flag = 0;
        let mut extra = Map::new();
        extra.insert("payload".into(), json!(payload));
        Reply::ok(&["r_a", "retrv", "uf(0)"], extra)
    }

    fn end_session(&self, b: &Body) -> Reply {
        const E: &str = "e_e";
        let id = field!(E, b.string("session_id"));
        let client = field!(E, b.string("client_id"));
        let Some(client) = client else {
            return Reply::error(Status::BadRequest, E, "missing field: client_id");
        };
        let Some(cell) = self.lookup(id.as_deref()) else {
            return Reply::error(Status::NotFound, E, "unknown session");
        };
        let mut s = cell.lock().unwrap();
        if s.deleted {
            return Reply::error(Status::NotFound, E, "unknown session");
        }
        let Some(role) = s.present(&client) else {
            return Reply::error(Status::Forbidden, E, "client is not in this session");
        };
        if s.present_count() == 2 {
            s.partial_end = true;
            s.departed = Some(role);
            return Reply::ok(&["e_a"], Map::new());
        }
        s.deleted = true;
        s.variables.clear();
        // the store lock is never taken while holding a session lock
        drop(s);
        self.sessions.write().unwrap().remove(id.as_deref().unwrap_or_default());
        Reply::ok(&["e_a", "clear"], Map::new())
    }

    fn session_status(&self, id: &str) -> Reply {
        let snapshot = self.lookup(Some(id)).and_then(|cell| {
            let s = cell.lock().unwrap();
            (!s.deleted).then(|| {
                let flags: BTreeMap<String, u8> = s.variables.iter().map(|(k, v)| (k.to_string(), v.flag)).collect();
                json!({
                    "session_id": id,
                    "created": 1,
                    "joined": u8::from(s.invitee_joined),
                    "partial_end": u8::from(s.partial_end),
                    "flags": flags,
                })
            })
        });
        match snapshot {
            Some(body) => Reply {
                status: Status::Ok,
                body,
            },
            None => Reply {
                status: Status::NotFound,
                body: json!({ "error": "unknown session" }),
            },
        }
    }

    /// Drops every session; returns how many there were.
    pub fn reset(&self) -> usize {
        let mut map = self.sessions.write().unwrap();
        let n = map.len();
        for cell in map.values() {
            cell.lock().unwrap().deleted = true;
        }
        map.clear();
        n
    }
}
