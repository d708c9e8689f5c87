//! Canonical sequence analysis: the observable session attributes that
//! identify each usage-model state, and the checks tying them to arc
//! semantics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Rule, StateId, UsageModel, Violation};

/// A tri-valued attribute: `0`, `1`, or `-` when it does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attr {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "-")]
    NotApplicable,
}

impl Attr {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Attr::One
        } else {
            Attr::Zero
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attr::Zero => "0",
            Attr::One => "1",
            Attr::NotApplicable => "-",
        })
    }
}

impl FromStr for Attr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "0" => Ok(Attr::Zero),
            "1" => Ok(Attr::One),
            "-" => Ok(Attr::NotApplicable),
            other => Err(format!("attribute must be 0, 1 or -, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalStateVector {
    pub created: Attr,
    pub joined: Attr,
    pub data_sent: Attr,
    pub partial_end: Attr,
}

impl CanonicalStateVector {
    /// The vector of "no session": before creation and after a full end.
    pub const NO_SESSION: Self = Self {
        created: Attr::Zero,
        joined: Attr::NotApplicable,
        data_sent: Attr::NotApplicable,
        partial_end: Attr::NotApplicable,
    };

    pub fn new(created: Attr, joined: Attr, data_sent: Attr, partial_end: Attr) -> Self {
        Self {
            created,
            joined,
            data_sent,
            partial_end,
        }
    }

    /// Projects a live session snapshot onto the canonical attributes.
    /// Partial end only applies once the invitee has joined.
    pub fn observed(joined: bool, data_sent: bool, partial_end: bool) -> Self {
        Self {
            created: Attr::One,
            joined: Attr::from_bool(joined),
            data_sent: Attr::from_bool(data_sent),
            partial_end: if joined {
                Attr::from_bool(partial_end)
            } else {
                Attr::NotApplicable
            },
        }
    }
}

impl fmt::Display for CanonicalStateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} {} {} {})",
            self.created, self.joined, self.data_sent, self.partial_end
        )
    }
}

/// State name to canonical vector. The sink carries no entry; it is observed
/// as [`CanonicalStateVector::NO_SESSION`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalTable {
    entries: BTreeMap<String, CanonicalStateVector>,
}

impl CanonicalTable {
    pub fn insert(&mut self, state: impl Into<String>, v: CanonicalStateVector) {
        self.entries.insert(state.into(), v);
    }

    pub fn get(&self, state: &str) -> Option<CanonicalStateVector> {
        self.entries.get(state).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, CanonicalStateVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Expected observation on entering `state`.
    pub fn expected(&self, model: &UsageModel, state: StateId) -> Option<CanonicalStateVector> {
        if state == model.sink() {
            Some(CanonicalStateVector::NO_SESSION)
        } else {
            self.get(model.state_name(state))
        }
    }

    /// The model state an observation corresponds to. "No session" maps to
    /// the source, where a fresh use would start.
    pub fn identify(&self, model: &UsageModel, observed: CanonicalStateVector) -> Option<StateId> {
        model
            .state_ids()
            .filter(|&s| s != model.sink())
            .find(|&s| self.get(model.state_name(s)) == Some(observed))
    }

    /// Parses the whitespace-separated table format:
    /// `state created joined data_sent partial_end`, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut table = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(format!("line {}: expected 5 fields, got {}", i + 1, fields.len()));
            }
            let attr = |k: usize| fields[k].parse::<Attr>().map_err(|e| format!("line {}: {e}", i + 1));
            let v = CanonicalStateVector::new(attr(1)?, attr(2)?, attr(3)?, attr(4)?);
            if table.entries.insert(fields[0].to_string(), v).is_some() {
                return Err(format!("line {}: duplicate state {}", i + 1, fields[0]));
            }
        }
        Ok(table)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# state created joined data_sent partial_end\n");
        for (k, v) in &self.entries {
            out.push_str(&format!(
                "{k} {} {} {} {}\n",
                v.created, v.joined, v.data_sent, v.partial_end
            ));
        }
        out
    }
}

/// Checks that the table identifies states uniquely and agrees with what
/// each arc's stimulus and response imply about the target state.
pub fn check_canonical_consistency(model: &UsageModel, table: &CanonicalTable) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashMap<CanonicalStateVector, &str> = HashMap::new();
    for s in model.state_ids() {
        if s == model.sink() {
            continue;
        }
        let name = model.state_name(s);
        match table.get(name) {
            None => out.push(Violation::new(
                Rule::CanonicalMissing,
                format!("state {name} has no canonical vector"),
            )),
            Some(v) => {
                if let Some(other) = seen.insert(v, name) {
                    out.push(Violation::new(
                        Rule::CanonicalInjective,
                        format!("states {other} and {name} share canonical vector {v}"),
                    ));
                }
            }
        }
    }

    for id in model.arc_ids() {
        let arc = model.arc(id);
        let (Some(_), Some(to)) = (table.expected(model, arc.from), table.expected(model, arc.to)) else {
            continue;
        };
        let mut broken = |why: &str| {
            out.push(Violation::new(
                Rule::CanonicalSemantics,
                format!("arc {}: {why}", model.arc_label(id)),
            ))
        };
        let r = &arc.response;
        if r.is_error() {
            if arc.to != arc.from {
                broken("error response must leave the state unchanged");
            }
            continue;
        }
        match arc.stimulus.base() {
            "C" if to.created != Attr::One => broken("successful create must end in created=1"),
            "J" if r.contains("j_a") && to.joined != Attr::One => broken("successful join must end in joined=1"),
            "S" if r.contains("uf(1)") && to.data_sent != Attr::One => {
                broken("successful send must end in data_sent=1")
            }
            "R" if r.contains("uf(0)") && to.data_sent != Attr::Zero => {
                broken("successful receive must end in data_sent=0")
            }
            "E" if r.contains("clear") && arc.to != model.sink() => broken("end with clear must go to the sink"),
            "E" if !r.contains("clear") && to.partial_end != Attr::One => {
                broken("end without clear must end in partial_end=1")
            }
            _ => {}
        }
    }
    out
}
