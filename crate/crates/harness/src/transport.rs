use std::sync::Arc;
use std::time::Duration;

use des_server::Controller;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("server unreachable: {0}")]
    Unreachable(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("bad response: {0}")]
    Protocol(String),
}

impl TransportError {
    /// Short tag recorded as the cause of a stop failure.
    pub fn cause(&self) -> String {
        match self {
            TransportError::Unreachable(m) => format!("transport/unreachable: {m}"),
            TransportError::Timeout(m) => format!("transport/timeout: {m}"),
            TransportError::Protocol(m) => format!("transport/protocol: {m}"),
        }
    }
}

pub trait Transport {
    fn post(&self, path: &str, body: &Value) -> Result<Response, TransportError>;
    fn get(&self, path: &str) -> Result<Response, TransportError>;
}

pub struct HttpTransport {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Protocol(e.to_string()))?;
        Ok(Self {
            base: base_url.trim_end_matches('/').to_string(),
            client,
        })
    }

    fn finish(&self, r: reqwest::Result<reqwest::blocking::Response>) -> Result<Response, TransportError> {
        let r = r.map_err(classify)?;
        let status = r.status().as_u16();
        let body = r.json::<Value>().map_err(|e| TransportError::Protocol(e.to_string()))?;
        Ok(Response { status, body })
    }
}

fn classify(e: reqwest::Error) -> TransportError {
    if e.is_timeout() {
        TransportError::Timeout(e.to_string())
    } else if e.is_connect() {
        TransportError::Unreachable(e.to_string())
    } else {
        TransportError::Protocol(e.to_string())
    }
}

impl Transport for HttpTransport {
    fn post(&self, path: &str, body: &Value) -> Result<Response, TransportError> {
        self.finish(self.client.post(format!("{}{path}", self.base)).json(body).send())
    }

    fn get(&self, path: &str) -> Result<Response, TransportError> {
        self.finish(self.client.get(format!("{}{path}", self.base)).send())
    }
}

/// Calls the server's controller directly, skipping HTTP.
pub struct InProcessTransport {
    controller: Arc<Controller>,
    reset_enabled: bool,
}

impl InProcessTransport {
    pub fn new(controller: Arc<Controller>, reset_enabled: bool) -> Self {
        Self {
            controller,
            reset_enabled,
        }
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }
}

impl Transport for InProcessTransport {
    fn post(&self, path: &str, body: &Value) -> Result<Response, TransportError> {
        let r = self
            .controller
            .dispatch("POST", path, body.to_string().as_bytes(), self.reset_enabled);
        Ok(Response {
            status: r.status.code(),
            body: r.body,
        })
    }

    fn get(&self, path: &str) -> Result<Response, TransportError> {
        let r = self.controller.dispatch("GET", path, b"", self.reset_enabled);
        Ok(Response {
            status: r.status.code(),
            body: r.body,
        })
    }
}
