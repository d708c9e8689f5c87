use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Seeded defects. Each one only widens what the server accepts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultConfig {
    /// Join does not check whether a participant already ended the session.
    pub bug_join_after_partial_end: bool,
    /// Receive checks only that a payload exists, ignores the flag, and
    /// leaves the payload in place.
    pub bug_receive_ignores_flag: bool,
    /// Create accepts requests with missing fields.
    pub bug_create_skips_validation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fixed,
    New,
}

pub const BUG_NAMES: [&str; 3] = [
    "join_after_partial_end",
    "receive_ignores_flag",
    "create_skips_validation",
];

impl FaultConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Fixed => Self::default(),
            Preset::New => Self {
                bug_join_after_partial_end: true,
                bug_receive_ignores_flag: true,
                bug_create_skips_validation: true,
            },
        }
    }

    /// Turns on one bug by name (with or without the `bug_` prefix).
    pub fn enable(&mut self, name: &str) -> Result<(), UnknownFault> {
        match name.trim().trim_start_matches("bug_") {
            "join_after_partial_end" => self.bug_join_after_partial_end = true,
            "receive_ignores_flag" => self.bug_receive_ignores_flag = true,
            "create_skips_validation" => self.bug_create_skips_validation = true,
            other => return Err(UnknownFault(other.to_string())),
        }
        Ok(())
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        let on = [
            self.bug_join_after_partial_end,
            self.bug_receive_ignores_flag,
            self.bug_create_skips_validation,
        ];
        BUG_NAMES
            .iter()
            .zip(on)
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect()
    }

    /// Parses `fixed`, `new`, or a comma-separated list of bug names.
    pub fn parse_list(text: &str) -> Result<Self, UnknownFault> {
        match text.trim() {
            "" | "fixed" | "none" => Ok(Self::default()),
            "new" | "all" => Ok(Self::preset(Preset::New)),
            list => {
                let mut f = Self::default();
                for name in list.split(',').filter(|s| !s.trim().is_empty()) {
                    f.enable(name)?;
                }
                Ok(f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown fault `{0}` (known: join_after_partial_end, receive_ignores_flag, create_skips_validation)")]
pub struct UnknownFault(pub String);

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixed" => Ok(Preset::Fixed),
            "new" => Ok(Preset::New),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

impl fmt::Display for FaultConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = self.enabled();
        if on.is_empty() {
            f.write_str("fixed")
        } else {
            f.write_str(&on.join(","))
        }
    }
}
