//! Statistical usage-based testing core.
//!
//! A usage model is a Mealy machine (stimulus/response arcs between states)
//! with a probability distribution over each state's outgoing arcs. This
//! crate parses models written in a subset of The Model Language, analyzes
//! the induced Markov chain, samples test suites from it, and turns test
//! outcomes into reliability statistics.

pub mod canonical;
pub mod certify;
pub mod fixture;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod suite;
pub mod testgen;
pub mod tml;

pub use canonical::{Attr, CanonicalStateVector, CanonicalTable};
pub use certify::{ArcOutcomeCounter, FailureKind, TestRecord, TestVerdict};
pub use markov::ChainStatistics;
pub use model::{Arc, ArcId, ModelError, ResponseLabel, StateId, StimulusLabel, UsageModel};
pub use testgen::{Method, TestCase, TestStep};
