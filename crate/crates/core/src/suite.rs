//! Suite composition and the suite exchange file.
//!
//! The file is JSON Lines: a header object `{"suite": {...}}` followed by one
//! object per test case `{"id", "method", "seed", "steps"}` where `steps` is
//! the list of stimulus keys.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::UsageModel;
use crate::testgen::{self, Method, TestCase, PRNG_ALGORITHM};
use crate::tml::render_model;

pub const SUITE_FORMAT: &str = "usecert-suite/1";

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("suite file line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("suite file has no header line")]
    MissingHeader,
    #[error("suite format `{0}` is not supported (expected {SUITE_FORMAT})")]
    Format(String),
    #[error("suite was generated from model `{suite}` ({suite_digest}), not `{model}` ({model_digest})")]
    ModelMismatch {
        suite: String,
        suite_digest: String,
        model: String,
        model_digest: String,
    },
    #[error("{0}")]
    Case(String),
}

/// How many cases of each kind to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub min_coverage: bool,
    pub weighted: usize,
    pub random: usize,
    pub seed: u64,
}

impl Default for Composition {
    fn default() -> Self {
        Self {
            min_coverage: true,
            weighted: 200,
            random: 5_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteMeta {
    pub format: String,
    pub model: String,
    /// FNV-1a digest of the rendered model, so a suite cannot silently run
    /// against a different model.
    pub model_digest: String,
    pub prng: String,
    pub composition: Composition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub meta: SuiteMeta,
    pub cases: Vec<TestCase>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    suite: SuiteMeta,
}

#[derive(Serialize, Deserialize)]
struct CaseLine<'a> {
    id: usize,
    method: Method,
    seed: Option<u64>,
    #[serde(borrow)]
    steps: Vec<std::borrow::Cow<'a, str>>,
}

pub fn model_digest(model: &UsageModel) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in render_model(model).bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

impl Suite {
    pub fn meta_for(model: &UsageModel, composition: Composition) -> SuiteMeta {
        SuiteMeta {
            format: SUITE_FORMAT.to_string(),
            model: model.name().to_string(),
            model_digest: model_digest(model),
            prng: PRNG_ALGORITHM.to_string(),
            composition,
        }
    }

    /// Generates min-coverage, then weighted, then random cases, numbered
    /// from 1 in that order. Returns generator warnings alongside.
    pub fn compose(model: &UsageModel, composition: Composition) -> (Suite, Vec<String>) {
        let mut cases = Vec::new();
        let mut warnings = Vec::new();
        let mut take = |g: testgen::Generated| {
            warnings.extend(g.warnings);
            for mut c in g.cases {
                c.id = cases.len() + 1;
                cases.push(c);
            }
        };
        if composition.min_coverage {
            take(testgen::generate_min_coverage(model));
        }
        if composition.weighted > 0 {
            take(testgen::generate_weighted(model, composition.weighted));
        }
        take(testgen::generate_random(model, composition.random, composition.seed));
        let meta = Self::meta_for(model, composition);
        (Suite { meta, cases }, warnings)
    }

    pub fn stimulus_count(&self) -> usize {
        self.cases.iter().map(|c| c.steps.len()).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Header {
            suite: self.meta.clone(),
        })
        .expect("serializable");
        out.push('\n');
        for c in &self.cases {
            let line = CaseLine {
                id: c.id,
                method: c.method,
                seed: c.seed,
                steps: c.steps.iter().map(|s| s.stimulus.key().into()).collect(),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }

    /// Reads a suite file and rebuilds every case against `model`.
    pub fn from_jsonl(model: &UsageModel, text: &str) -> Result<Suite, SuiteError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(SuiteError::MissingHeader)?;
        let header: Header = serde_json::from_str(first).map_err(|source| SuiteError::Json { line: 1, source })?;
        let meta = header.suite;
        if meta.format != SUITE_FORMAT {
            return Err(SuiteError::Format(meta.format));
        }
        let digest = model_digest(model);
        if meta.model_digest != digest {
            return Err(SuiteError::ModelMismatch {
                suite: meta.model.clone(),
                suite_digest: meta.model_digest.clone(),
                model: model.name().to_string(),
                model_digest: digest,
            });
        }
        let mut cases = Vec::new();
        for (i, line) in lines {
            let c: CaseLine = serde_json::from_str(line).map_err(|source| SuiteError::Json { line: i + 1, source })?;
            cases.push(TestCase::from_stimuli(model, c.id, c.method, c.seed, &c.steps).map_err(SuiteError::Case)?);
        }
        Ok(Suite { meta, cases })
    }
}
