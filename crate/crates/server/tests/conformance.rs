//! Endpoint-level requirement checks against the fixed variant, and fault
//! flag isolation.

use des_server::{Controller, FaultConfig, Preset, Reply, Status};
use proptest::prelude::*;
use serde_json::{json, Value};

struct Client {
    c: Controller,
}

impl Client {
    fn new(faults: FaultConfig) -> Self {
        Self {
            c: Controller::new(faults),
        }
    }

    fn post(&self, path: &str, body: Value) -> Reply {
        self.c.dispatch("POST", path, body.to_string().as_bytes(), false)
    }

    fn status(&self, id: &str) -> Reply {
        self.c.dispatch("GET", &format!("/sessions/{id}"), b"", false)
    }

    fn create(&self) -> String {
        let r = self.post("/create_session", valid_create());
        assert_eq!(r.status, Status::Ok);
        r.body["session_id"].as_str().unwrap().to_string()
    }
}

fn valid_create() -> Value {
    json!({"initiator_id": "A", "invitee_id": "B", "variable_ids": [1, 2, 3], "variable_sizes": [2, 2, 2]})
}

fn atoms(r: &Reply) -> Vec<String> {
    r.body["response"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect()
}

fn fixed() -> Client {
    Client::new(FaultConfig::default())
}

// create

#[test]
fn create_makes_a_new_session_with_cleared_flags() {
    let s = fixed();
    let r = s.post("/create_session", valid_create());
    assert_eq!(r.status.code(), 200);
    assert_eq!(atoms(&r), ["c_s", "c_a"]);
    let id = r.body["session_id"].as_str().unwrap();
    let st = s.status(id);
    assert_eq!(st.status, Status::Ok);
    assert_eq!(st.body["created"], 1);
    assert_eq!(st.body["joined"], 0);
    assert_eq!(st.body["partial_end"], 0);
    assert_eq!(st.body["flags"], json!({"1": 0, "2": 0, "3": 0}));
}

#[test]
fn create_acknowledges_with_a_fresh_id_each_time() {
    let s = fixed();
    assert_ne!(s.create(), s.create());
    assert_eq!(s.c.session_count(), 2);
}

#[test]
fn create_rejects_incomplete_or_inconsistent_requests() {
    let s = fixed();
    for field in ["initiator_id", "invitee_id", "variable_ids", "variable_sizes"] {
        let mut body = valid_create();
        body.as_object_mut().unwrap().remove(field);
        let r = s.post("/create_session", body);
        assert_eq!((r.status.code(), atoms(&r)), (400, vec!["c_e".to_string()]), "{field}");
    }
    let bad = [
        json!({"initiator_id": "A", "invitee_id": "B", "variable_ids": [1, 2], "variable_sizes": [1]}),
        json!({"initiator_id": "A", "invitee_id": "B", "variable_ids": [], "variable_sizes": []}),
        json!({"initiator_id": "A", "invitee_id": "B", "variable_ids": [1, 1], "variable_sizes": [1, 1]}),
        json!({"initiator_id": 7, "invitee_id": "B", "variable_ids": [1], "variable_sizes": [1]}),
    ];
    for body in bad {
        assert_eq!(s.post("/create_session", body).status, Status::BadRequest);
    }
    assert_eq!(
        s.c.dispatch("POST", "/create_session", b"{not json", false).status,
        Status::BadRequest
    );
    assert_eq!(s.c.session_count(), 0);
}

// join

#[test]
fn join_requires_an_existing_session() {
    let s = fixed();
    let r = s.post("/join_session", json!({"session_id": "404", "client_id": "B"}));
    assert_eq!((r.status.code(), atoms(&r)), (404, vec!["j_e".to_string()]));
}

#[test]
fn join_requires_the_invitee() {
    let s = fixed();
    let id = s.create();
    let r = s.post("/join_session", json!({"session_id": id, "client_id": "X"}));
    assert_eq!((r.status.code(), atoms(&r)), (403, vec!["j_e".to_string()]));
    let r = s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    assert_eq!(atoms(&r), ["j_a"]);
    assert_eq!(s.status(&id).body["joined"], 1);
    assert_eq!(
        s.post("/join_session", json!({"session_id": id, "client_id": "B"}))
            .status,
        Status::Conflict
    );
}

#[test]
fn join_after_partial_end_is_rejected() {
    let s = fixed();
    let id = s.create();
    s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    assert_eq!(
        atoms(&s.post("/end_session", json!({"session_id": id, "client_id": "B"}))),
        ["e_a"]
    );
    let r = s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    assert_eq!((r.status.code(), atoms(&r)), (409, vec!["j_e".to_string()]));
    assert_eq!(s.status(&id).body["partial_end"], 1);
}

// send

#[test]
fn send_requires_a_participant() {
    let s = fixed();
    let id = s.create();
    let send = |client: &str| {
        s.post(
            "/send_data",
            json!({"session_id": id, "client_id": client, "var_id": 1, "payload": [1.0, 2.0]}),
        )
    };
    let r = send("X");
    assert_eq!((r.status.code(), atoms(&r)), (403, vec!["s_e".to_string()]));
    // the invitee is not in the session until it joins
    assert_eq!(send("B").status, Status::Forbidden);
    let r = send("A");
    assert_eq!(atoms(&r), ["s_a", "store", "uf(1)"]);
    assert_eq!(s.status(&id).body["flags"]["1"], 1);
}

#[test]
fn send_to_missing_session_is_rejected() {
    let s = fixed();
    let r = s.post(
        "/send_data",
        json!({"session_id": "9", "client_id": "A", "var_id": 1, "payload": [1.0, 2.0]}),
    );
    assert_eq!((r.status.code(), atoms(&r)), (404, vec!["s_e".to_string()]));
}

#[test]
fn send_never_overwrites_unread_data() {
    let s = fixed();
    let id = s.create();
    let send = |var: u64, payload: Value| {
        s.post(
            "/send_data",
            json!({"session_id": id, "client_id": "A", "var_id": var, "payload": payload}),
        )
    };
    assert_eq!(send(1, json!([1.0, 2.0])).status, Status::Ok);
    let r = send(1, json!([3.0, 4.0]));
    assert_eq!((r.status.code(), atoms(&r)), (409, vec!["s_e".to_string()]));
    assert_eq!(send(2, json!([1.0])).status, Status::BadRequest);
    assert_eq!(send(9999, json!([1.0, 2.0])).status, Status::NotFound);
    let r = s.post(
        "/receive_data",
        json!({"session_id": id, "client_id": "A", "var_id": 1}),
    );
    assert_eq!(r.body["payload"], json!([1.0, 2.0]));
}

// receive

#[test]
fn receive_requires_a_participant() {
    let s = fixed();
    let id = s.create();
    s.post(
        "/send_data",
        json!({"session_id": id, "client_id": "A", "var_id": 1, "payload": [1.0, 2.0]}),
    );
    let r = s.post(
        "/receive_data",
        json!({"session_id": id, "client_id": "X", "var_id": 1}),
    );
    assert_eq!((r.status.code(), atoms(&r)), (403, vec!["r_e".to_string()]));
    let r = s.post(
        "/receive_data",
        json!({"session_id": "77", "client_id": "A", "var_id": 1}),
    );
    assert_eq!(r.status, Status::NotFound);
    assert_eq!(s.status(&id).body["flags"]["1"], 1);
}

#[test]
fn receive_checks_the_flag() {
    let s = fixed();
    let id = s.create();
    s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    let recv = || {
        s.post(
            "/receive_data",
            json!({"session_id": id, "client_id": "B", "var_id": 1}),
        )
    };
    let r = recv();
    assert_eq!((r.status.code(), atoms(&r)), (409, vec!["r_e".to_string()]));
    s.post(
        "/send_data",
        json!({"session_id": id, "client_id": "A", "var_id": 1, "payload": [5.0, 6.0]}),
    );
    let r = recv();
    assert_eq!(atoms(&r), ["r_a", "retrv", "uf(0)"]);
    assert_eq!(r.body["payload"], json!([5.0, 6.0]));
    assert_eq!(s.status(&id).body["flags"]["1"], 0);
    assert_eq!(recv().status, Status::Conflict);
    let r = s.post(
        "/receive_data",
        json!({"session_id": id, "client_id": "B", "var_id": 9999}),
    );
    assert_eq!((r.status.code(), atoms(&r)), (404, vec!["r_e".to_string()]));
}

// end

#[test]
fn end_of_missing_session_is_rejected() {
    let s = fixed();
    let r = s.post("/end_session", json!({"session_id": "5", "client_id": "A"}));
    assert_eq!((r.status.code(), atoms(&r)), (404, vec!["e_e".to_string()]));
}

#[test]
fn end_from_outsider_is_rejected() {
    let s = fixed();
    let id = s.create();
    for client in ["X", "B"] {
        let r = s.post("/end_session", json!({"session_id": id, "client_id": client}));
        assert_eq!((r.status.code(), atoms(&r)), (403, vec!["e_e".to_string()]), "{client}");
    }
    s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    s.post("/end_session", json!({"session_id": id, "client_id": "B"}));
    // a departed participant is no longer in the session
    assert_eq!(
        s.post("/end_session", json!({"session_id": id, "client_id": "B"}))
            .status,
        Status::Forbidden
    );
    assert_eq!(s.status(&id).status, Status::Ok);
}

#[test]
fn last_participant_ending_clears_the_session() {
    let s = fixed();
    let id = s.create();
    s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    s.post(
        "/send_data",
        json!({"session_id": id, "client_id": "A", "var_id": 2, "payload": [0.0, 0.0]}),
    );
    assert_eq!(
        atoms(&s.post("/end_session", json!({"session_id": id, "client_id": "B"}))),
        ["e_a"]
    );
    let st = s.status(&id).body;
    assert_eq!(
        (
            st["joined"].clone(),
            st["partial_end"].clone(),
            st["flags"]["2"].clone()
        ),
        (json!(1), json!(1), json!(1))
    );
    let r = s.post("/end_session", json!({"session_id": id, "client_id": "A"}));
    assert_eq!(atoms(&r), ["e_a", "clear"]);
    assert_eq!(s.status(&id).status, Status::NotFound);
    assert_eq!(s.c.session_count(), 0);
    // a lone initiator ends with a clear too
    let id = s.create();
    assert_eq!(
        atoms(&s.post("/end_session", json!({"session_id": id, "client_id": "A"}))),
        ["e_a", "clear"]
    );
}

// sessions

#[test]
fn sessions_are_independent() {
    let s = fixed();
    let a = s.create();
    let b = s.create();
    let before = s.status(&b).body;
    s.post("/join_session", json!({"session_id": a, "client_id": "B"}));
    s.post(
        "/send_data",
        json!({"session_id": a, "client_id": "A", "var_id": 1, "payload": [1.0, 1.0]}),
    );
    s.post("/end_session", json!({"session_id": a, "client_id": "B"}));
    assert_eq!(s.status(&b).body, before);
    s.post("/end_session", json!({"session_id": a, "client_id": "A"}));
    assert_eq!(s.status(&b).body, before);
}

#[test]
fn status_reads_are_idempotent() {
    let s = fixed();
    let id = s.create();
    assert_eq!(s.status(&id), s.status(&id));
    assert_eq!(s.status("nope").status, Status::NotFound);
}

#[test]
fn reset_only_in_test_mode() {
    let s = fixed();
    s.create();
    assert_eq!(s.c.dispatch("POST", "/reset", b"", false).status, Status::NotFound);
    let r = s.c.dispatch("POST", "/reset", b"", true);
    assert_eq!(r.body["cleared"], 1);
    assert_eq!(s.c.session_count(), 0);
}

// faults

fn only(name: &str) -> FaultConfig {
    let mut f = FaultConfig::default();
    f.enable(name).unwrap();
    f
}

#[test]
fn join_fault_admits_a_rejoin_after_partial_end() {
    let s = Client::new(only("join_after_partial_end"));
    let id = s.create();
    s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    s.post("/end_session", json!({"session_id": id, "client_id": "B"}));
    let r = s.post("/join_session", json!({"session_id": id, "client_id": "B"}));
    assert_eq!(atoms(&r), ["j_a"]);
    assert_eq!(s.status(&id).body["partial_end"], 0);
    // outsiders and double joins are still refused
    assert_eq!(
        s.post("/join_session", json!({"session_id": id, "client_id": "X"}))
            .status,
        Status::Forbidden
    );
    assert_eq!(
        s.post("/join_session", json!({"session_id": id, "client_id": "B"}))
            .status,
        Status::Conflict
    );
}

#[test]
fn receive_fault_returns_stale_data() {
    let s = Client::new(only("receive_ignores_flag"));
    let id = s.create();
    s.post(
        "/send_data",
        json!({"session_id": id, "client_id": "A", "var_id": 1, "payload": [4.0, 2.0]}),
    );
    let recv = || {
        s.post(
            "/receive_data",
            json!({"session_id": id, "client_id": "A", "var_id": 1}),
        )
    };
    assert_eq!(recv().body["payload"], json!([4.0, 2.0]));
    assert_eq!(s.status(&id).body["flags"]["1"], 0);
    let second = recv();
    assert_eq!(atoms(&second), ["r_a", "retrv", "uf(0)"]);
    assert_eq!(second.body["payload"], json!([4.0, 2.0]));
    // never-written variables still have nothing to give
    let r = s.post(
        "/receive_data",
        json!({"session_id": id, "client_id": "A", "var_id": 2}),
    );
    assert_eq!(r.status, Status::Conflict);
}

#[test]
fn create_fault_accepts_missing_fields() {
    let s = Client::new(only("create_skips_validation"));
    let r = s.post(
        "/create_session",
        json!({"initiator_id": "A", "variable_ids": [1], "variable_sizes": [1]}),
    );
    assert_eq!(atoms(&r), ["c_s", "c_a"]);
    let id = r.body["session_id"].as_str().unwrap();
    assert_eq!(s.status(id).body["created"], 1);
    // nobody can join a session without an invitee
    assert_eq!(
        s.post("/join_session", json!({"session_id": id, "client_id": "B"}))
            .status,
        Status::Forbidden
    );
    let r = s.post(
        "/create_session",
        json!({"initiator_id": "A", "invitee_id": "B", "variable_ids": [1, 2], "variable_sizes": [1]}),
    );
    assert_eq!(r.status, Status::BadRequest);
}

#[test]
fn new_preset_enables_all_three() {
    let f = FaultConfig::preset(Preset::New);
    assert!(f.bug_join_after_partial_end && f.bug_receive_ignores_flag && f.bug_create_skips_validation);
    assert_eq!(FaultConfig::preset(Preset::Fixed), FaultConfig::default());
}

/// Abstract request over a small universe of sessions, clients and
/// variables. Session references index the ids created so far.
#[derive(Debug, Clone)]
enum Op {
    Create { drop_field: Option<usize> },
    Join(usize, usize),
    Send(usize, usize, u64),
    Receive(usize, usize, u64),
    End(usize, usize),
    Status(usize),
}

fn op() -> impl Strategy<Value = Op> {
    let sess = 0usize..4;
    let client = 0usize..3;
    let var = prop_oneof![Just(1u64), Just(2), Just(9999)];
    prop_oneof![
        proptest::option::weighted(0.3, 0usize..4).prop_map(|drop_field| Op::Create { drop_field }),
        (sess.clone(), client.clone()).prop_map(|(s, c)| Op::Join(s, c)),
        (sess.clone(), client.clone(), var.clone()).prop_map(|(s, c, v)| Op::Send(s, c, v)),
        (sess.clone(), client.clone(), var).prop_map(|(s, c, v)| Op::Receive(s, c, v)),
        (sess.clone(), client).prop_map(|(s, c)| Op::End(s, c)),
        sess.prop_map(Op::Status),
    ]
}

const CLIENTS: [&str; 3] = ["A", "B", "X"];

/// Replays `ops`, returning (endpoint, reply) per request.
fn replay(faults: FaultConfig, ops: &[Op]) -> Vec<(&'static str, Reply)> {
    let s = Client::new(faults);
    let mut ids: Vec<String> = Vec::new();
    let sid = |ids: &Vec<String>, k: usize| ids.get(k).cloned().unwrap_or_else(|| "none".into());
    ops.iter()
        .map(|op| match op {
            Op::Create { drop_field } => {
                let mut body = valid_create();
                if let Some(k) = drop_field {
                    let key = ["initiator_id", "invitee_id", "variable_ids", "variable_sizes"][*k];
                    body.as_object_mut().unwrap().remove(key);
                }
                let r = s.post("/create_session", body);
                if let Some(id) = r.body["session_id"].as_str() {
                    ids.push(id.to_string());
                }
                ("create", r)
            }
            Op::Join(k, c) => (
                "join",
                s.post(
                    "/join_session",
                    json!({"session_id": sid(&ids, *k), "client_id": CLIENTS[*c]}),
                ),
            ),
            Op::Send(k, c, v) => (
                "send",
                s.post(
                    "/send_data",
                    json!({"session_id": sid(&ids, *k), "client_id": CLIENTS[*c], "var_id": v, "payload": [1.0, 2.0]}),
                ),
            ),
            Op::Receive(k, c, v) => (
                "receive",
                s.post(
                    "/receive_data",
                    json!({"session_id": sid(&ids, *k), "client_id": CLIENTS[*c], "var_id": v}),
                ),
            ),
            Op::End(k, c) => (
                "end",
                s.post(
                    "/end_session",
                    json!({"session_id": sid(&ids, *k), "client_id": CLIENTS[*c]}),
                ),
            ),
            Op::Status(k) => ("status", s.status(&sid(&ids, *k))),
        })
        .collect()
}

/// Status and body without the free-text error message.
fn observable(r: &Reply) -> (Status, Value) {
    let mut body = r.body.clone();
    if let Some(m) = body.as_object_mut() {
        m.remove("error");
    }
    (r.status, body)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]
    /// Each fault's first visible effect is to accept a request the fixed
    /// server rejects, on its own endpoint only.
    #[test]
    fn faults_only_widen_their_own_endpoint(ops in proptest::collection::vec(op(), 1..40)) {
        let base = replay(FaultConfig::default(), &ops);
        for (name, endpoint) in [
            ("join_after_partial_end", "join"),
            ("receive_ignores_flag", "receive"),
            ("create_skips_validation", "create"),
        ] {
            let faulty = replay(only(name), &ops);
            if let Some(i) = (0..ops.len()).find(|&i| observable(&base[i].1) != observable(&faulty[i].1)) {
                prop_assert_eq!(faulty[i].0, endpoint, "{} diverged on {:?}", name, ops[i]);
                prop_assert_ne!(base[i].1.status, Status::Ok);
                prop_assert_eq!(faulty[i].1.status, Status::Ok);
            }
        }
    }
}

#[test]
fn concurrent_sessions_do_not_interfere() {
    let s = std::sync::Arc::new(fixed());
    let threads: Vec<_> = (0..8)
        .map(|t| {
            let s = s.clone();
            std::thread::spawn(move || {
                for _ in 0..50 {
                    let id = s.create();
                    let v = (t % 3 + 1) as u64;
                    assert_eq!(
                        s.post("/join_session", json!({"session_id": id, "client_id": "B"}))
                            .status,
                        Status::Ok
                    );
                    let r = s.post(
                        "/send_data",
                        json!({"session_id": id, "client_id": "A", "var_id": v, "payload": [t as f64, 0.0]}),
                    );
                    assert_eq!(r.status, Status::Ok);
                    let r = s.post(
                        "/receive_data",
                        json!({"session_id": id, "client_id": "B", "var_id": v}),
                    );
                    assert_eq!(r.body["payload"], json!([t as f64, 0.0]));
                    assert_eq!(
                        atoms(&s.post("/end_session", json!({"session_id": id, "client_id": "B"}))),
                        ["e_a"]
                    );
                    assert_eq!(
                        atoms(&s.post("/end_session", json!({"session_id": id, "client_id": "A"}))),
                        ["e_a", "clear"]
                    );
                }
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    assert_eq!(s.c.session_count(), 0);
}
