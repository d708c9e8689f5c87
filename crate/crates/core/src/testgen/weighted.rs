use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Generated, Method, TestCase};
use crate::model::{ArcId, StateId, UsageModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedCaps {
    pub max_length: usize,
    pub max_frontier: usize,
}

impl Default for WeightedCaps {
    fn default() -> Self {
        Self {
            max_length: 100,
            max_frontier: 1_000_000,
        }
    }
}

struct Prefix {
    probability: f64,
    state: StateId,
    arcs: Vec<ArcId>,
}

impl PartialEq for Prefix {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Prefix {}

impl PartialOrd for Prefix {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap priority: higher probability first, then the lexicographically
// smaller stimulus sequence. Paths sharing a prefix sit in the same state at
// their first difference, and arc ids within a state follow stimulus order,
// so comparing arc ids compares stimulus keys.
impl Ord for Prefix {
    fn cmp(&self, other: &Self) -> Ordering {
        self.probability
            .total_cmp(&other.probability)
            .then_with(|| other.arcs.cmp(&self.arcs))
    }
}

/// The `k` most probable source-to-sink paths in non-increasing order of
/// probability, ties broken by stimulus sequence.
pub fn generate_weighted(model: &UsageModel, k: usize) -> Generated {
    generate_weighted_with_caps(model, k, WeightedCaps::default())
}

/// Best-first search over path prefixes. Extending a prefix never raises
/// its probability, so complete paths leave the queue in order.
pub fn generate_weighted_with_caps(model: &UsageModel, k: usize, caps: WeightedCaps) -> Generated {
    let mut out = Generated::default();
    let mut heap = BinaryHeap::new();
    heap.push(Prefix {
        probability: 1.0,
        state: model.source(),
        arcs: Vec::new(),
    });
    let mut length_capped = false;
    while out.cases.len() < k {
        let Some(prefix) = heap.pop() else { break };
        if prefix.state == model.sink() {
            let id = out.cases.len();
            out.cases
                .push(TestCase::from_arcs(model, id, Method::Weighted, None, &prefix.arcs));
            continue;
        }
        if prefix.arcs.len() >= caps.max_length {
            length_capped = true;
            continue;
        }
        for &a in model.outgoing(prefix.state) {
            let arc = model.arc(a);
            let mut arcs = prefix.arcs.clone();
            arcs.push(a);
            heap.push(Prefix {
                probability: prefix.probability * arc.probability,
                state: arc.to,
                arcs,
            });
        }
        if heap.len() > caps.max_frontier {
            out.warnings.push(format!(
                "weighted search stopped: frontier exceeded {} prefixes",
                caps.max_frontier
            ));
            break;
        }
    }
    if out.cases.len() < k {
        let why = if length_capped {
            format!(" (paths longer than {} steps were not explored)", caps.max_length)
        } else {
            String::new()
        };
        out.warnings.push(format!(
            "weighted sampling found {} of {k} requested paths{why}",
            out.cases.len()
        ));
    }
    out
}
