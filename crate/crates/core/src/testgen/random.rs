use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Generated, Method, TestCase};
use crate::model::{ArcId, StateId, UsageModel};

/// Name and version of the sampling stream. Suites record it; any change to
/// the generator or to how draws map to arcs must bump the version.
pub const PRNG_ALGORITHM: &str = "chacha8/seed_from_u64/u53-inverse-cdf/v1";

/// Longest random walk attempted before a case is abandoned.
pub const WALK_CAP: usize = 10_000;

/// ChaCha8 stream yielding uniform doubles in `[0, 1)` from the top 53 bits
/// of each 64-bit output.
pub struct Prng(ChaCha8Rng);

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Picks an outgoing arc of `state` by inverse CDF over the arcs in
    /// stimulus-key order.
    pub fn choose_arc(&mut self, model: &UsageModel, state: StateId) -> ArcId {
        let out = model.outgoing(state);
        let u = self.next_f64();
        let mut acc = 0.0;
        for &a in out {
            acc += model.arc(a).probability;
            if u < acc {
                return a;
            }
        }
        *out.last().expect("non-sink state has outgoing arcs")
    }
}

/// `n` independent walks from source to sink drawn from one seeded stream.
/// Duplicate walks are kept.
pub fn generate_random(model: &UsageModel, n: usize, seed: u64) -> Generated {
    let mut rng = Prng::new(seed);
    let mut out = Generated::default();
    for id in 0..n {
        let mut state = model.source();
        let mut arcs = Vec::new();
        while state != model.sink() && arcs.len() < WALK_CAP {
            let a = rng.choose_arc(model, state);
            arcs.push(a);
            state = model.arc(a).to;
        }
        if state != model.sink() {
            out.warnings.push(format!(
                "random case {id} abandoned after {WALK_CAP} steps without reaching the sink"
            ));
            continue;
        }
        out.cases
            .push(TestCase::from_arcs(model, id, Method::Random, Some(seed), &arcs));
    }
    out
}
