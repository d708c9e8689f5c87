use std::time::Duration;

use des_server::{spawn, FaultConfig, Preset, ServerConfig};
use serde_json::Value;
use usecert_core::fixture::{data_exchange_model, data_exchange_table};
use usecert_core::suite::{Composition, Suite};
use usecert_harness::{execute_suite, HttpTransport, Response, RunError, RunOptions, Transport, TransportError};

fn suite() -> Suite {
    Suite::compose(
        &data_exchange_model(),
        Composition {
            min_coverage: true,
            weighted: 10,
            random: 40,
            seed: 3,
        },
    )
    .0
}

fn start(faults: FaultConfig) -> des_server::ServerHandle {
    spawn(ServerConfig {
        port: 0,
        enable_reset: true,
        faults,
        ..ServerConfig::default()
    })
    .unwrap()
}

#[test]
fn suite_over_http_matches_in_process() {
    let m = data_exchange_model();
    let table = data_exchange_table();
    for faults in [FaultConfig::default(), FaultConfig::preset(Preset::New)] {
        let server = start(faults);
        let http = HttpTransport::new(&server.url(), Duration::from_secs(5)).unwrap();
        let over_http = execute_suite(&suite(), &m, &table, &http, RunOptions::default()).unwrap();
        let local =
            usecert_harness::InProcessTransport::new(std::sync::Arc::new(des_server::Controller::new(faults)), true);
        let in_process = execute_suite(&suite(), &m, &table, &local, RunOptions::default()).unwrap();
        assert_eq!(over_http, in_process);
    }
}

/// A port that was just free; nothing listens on it afterwards.
fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    drop(l);
    format!("http://127.0.0.1:{port}")
}

#[test]
fn unreachable_server_aborts_without_a_record() {
    let m = data_exchange_model();
    let http = HttpTransport::new(&dead_url(), Duration::from_secs(2)).unwrap();
    let err = execute_suite(&suite(), &m, &data_exchange_table(), &http, RunOptions::default()).unwrap_err();
    match err {
        RunError::Unreachable {
            error: TransportError::Unreachable(_),
            completed: 0,
            partial: None,
        } => {}
        other => panic!("{other:?}"),
    }
}

/// Goes away after a fixed number of requests.
struct Failing {
    inner: usecert_harness::InProcessTransport,
    left: std::cell::Cell<usize>,
}

impl Transport for Failing {
    fn post(&self, path: &str, body: &Value) -> Result<Response, TransportError> {
        self.tick()?;
        self.inner.post(path, body)
    }

    fn get(&self, path: &str) -> Result<Response, TransportError> {
        self.tick()?;
        self.inner.get(path)
    }
}

impl Failing {
    fn tick(&self) -> Result<(), TransportError> {
        match self.left.get() {
            0 => Err(TransportError::Unreachable("connection refused".into())),
            n => {
                self.left.set(n - 1);
                Ok(())
            }
        }
    }
}

#[test]
fn server_lost_mid_run_keeps_partial_on_request() {
    let m = data_exchange_model();
    let failing = || Failing {
        inner: usecert_harness::InProcessTransport::new(
            std::sync::Arc::new(des_server::Controller::new(FaultConfig::default())),
            true,
        ),
        left: std::cell::Cell::new(300),
    };
    let run = |keep_partial| {
        let options = RunOptions {
            keep_partial,
            ..RunOptions::default()
        };
        execute_suite(&suite(), &m, &data_exchange_table(), &failing(), options).unwrap_err()
    };
    match run(true) {
        RunError::Unreachable {
            partial: Some(p),
            completed,
            ..
        } => {
            assert!(completed > 0);
            assert_eq!(p.tests.len(), completed);
            assert_eq!(p.totals().failed_tests, 0);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(run(false), RunError::Unreachable { partial: None, .. }));
}
