use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::faults::{FaultConfig, UnknownFault};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Exposes `POST /reset`, which drops all sessions.
    pub enable_reset: bool,
    pub faults: FaultConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            enable_reset: false,
            faults: FaultConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("{var}: {message}")]
    Env { var: String, message: String },
    #[error(transparent)]
    Fault(#[from] UnknownFault),
}

impl ServerConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.display().to_string(),
            source,
        })
    }

    /// Applies `DES_HOST`, `DES_PORT`, `DES_BUGS` and `DES_ENABLE_RESET`
    /// from `get` (normally `std::env::var`).
    pub fn apply_env(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(h) = get("DES_HOST") {
            self.host = h;
        }
        if let Some(p) = get("DES_PORT") {
            self.port = p.trim().parse().map_err(|_| ConfigError::Env {
                var: "DES_PORT".into(),
                message: format!("`{p}` is not a port number"),
            })?;
        }
        if let Some(b) = get("DES_BUGS") {
            self.faults = FaultConfig::parse_list(&b)?;
        }
        if let Some(r) = get("DES_ENABLE_RESET") {
            self.enable_reset = match r.trim() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" | "" => false,
                other => {
                    return Err(ConfigError::Env {
                        var: "DES_ENABLE_RESET".into(),
                        message: format!("`{other}` is not a boolean"),
                    })
                }
            };
        }
        Ok(self)
    }
}
