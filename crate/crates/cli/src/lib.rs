//! The certification pipeline behind the `usecert` command.
//!
//! Artifacts written to the output directory:
//! `analysis.txt`/`analysis.json`, `suite.jsonl`, `record.json`,
//! `report.txt`/`report.json` and `verdict.json`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use des_server::{FaultConfig, ServerConfig};
use serde::Serialize;
use usecert_core::canonical::{check_canonical_consistency, CanonicalTable};
use usecert_core::certify::{render_report, CertificationReport, TestRecord};
use usecert_core::fixture;
use usecert_core::markov::AnalysisReport;
use usecert_core::suite::{Composition, Suite};
use usecert_core::{ChainStatistics, UsageModel};
use usecert_harness::{execute_suite, HttpTransport, RunError, RunOptions};

pub const DEFAULT_THRESHOLD: f64 = 0.99;
const REQUEST_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Certified = 0,
    NotCertified = 1,
    Config = 2,
    Unreachable = 3,
    ModelInvalid = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Config,
            message: message.into(),
        }
    }

    fn model(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::ModelInvalid,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// A parsed, validated model and its canonical state table (if known).
pub struct LoadedModel {
    pub model: UsageModel,
    pub table: Option<CanonicalTable>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Loads `model` (the bundled fixture when `None`) and validates it. The
/// bundled canonical table is used for the bundled model only.
pub fn load_model(model: Option<&Path>, canon: Option<&Path>) -> Result<LoadedModel, CliError> {
    let (m, default_table) = match model {
        None => (fixture::data_exchange_model(), Some(fixture::data_exchange_table())),
        Some(p) => {
            let text = read(p)?;
            let m = UsageModel::from_tml(&text).map_err(|e| CliError::model(format!("{}: {e}", p.display())))?;
            (m, None)
        }
    };
    let table = match canon {
        Some(p) => {
            Some(CanonicalTable::parse(&read(p)?).map_err(|e| CliError::model(format!("{}: {e}", p.display())))?)
        }
        None => default_table,
    };
    let mut problems: Vec<String> = m.validate().iter().map(ToString::to_string).collect();
    if let Some(t) = &table {
        problems.extend(check_canonical_consistency(&m, t).iter().map(ToString::to_string));
    }
    if !problems.is_empty() {
        return Err(CliError::model(format!(
            "model {} is invalid:\n  {}",
            m.name(),
            problems.join("\n  ")
        )));
    }
    Ok(LoadedModel { model: m, table })
}

pub fn analyze(model: &UsageModel) -> Result<AnalysisReport, CliError> {
    let stats = ChainStatistics::analyze(model).map_err(|e| CliError::model(e.to_string()))?;
    Ok(stats.report(model))
}

pub fn write_analysis(dir: &Path, report: &AnalysisReport) -> Result<(), CliError> {
    write(dir, "analysis.txt", &report.to_text())?;
    write(
        dir,
        "analysis.json",
        &serde_json::to_string_pretty(report).expect("serializable"),
    )?;
    Ok(())
}

pub fn generate(model: &UsageModel, composition: Composition) -> (Suite, Vec<String>) {
    Suite::compose(model, composition)
}

pub fn load_suite(model: &UsageModel, path: &Path) -> Result<Suite, CliError> {
    Suite::from_jsonl(model, &read(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn load_record(model: &UsageModel, path: &Path) -> Result<TestRecord, CliError> {
    let record =
        TestRecord::from_json(&read(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    record
        .check_against(model)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServerTarget {
    External(String),
    /// Start a server with these faults on a free local port for the run.
    Local(FaultConfig),
}

#[derive(Debug)]
pub struct RunFailure {
    pub error: CliError,
    /// Results gathered before the server became unreachable, when asked for.
    pub partial: Option<Box<TestRecord>>,
}

impl From<CliError> for RunFailure {
    fn from(error: CliError) -> Self {
        Self { error, partial: None }
    }
}

/// Executes `suite` against `target`.
pub fn run_suite(
    loaded: &LoadedModel,
    suite: &Suite,
    target: &ServerTarget,
    keep_partial: bool,
) -> Result<TestRecord, RunFailure> {
    let Some(table) = &loaded.table else {
        return Err(CliError::config("running a suite needs a canonical state table (--canon)").into());
    };
    let local;
    let url = match target {
        ServerTarget::External(url) => url.clone(),
        ServerTarget::Local(faults) => {
            let config = ServerConfig {
                port: 0,
                enable_reset: true,
                faults: *faults,
                ..ServerConfig::default()
            };
            local =
                des_server::spawn(config).map_err(|e| CliError::config(format!("cannot start local server: {e}")))?;
            local.url()
        }
    };
    let transport = HttpTransport::new(&url, REQUEST_TIMEOUT).map_err(|e| CliError::config(e.to_string()))?;
    let options = RunOptions {
        keep_partial,
        ..RunOptions::default()
    };
    execute_suite(suite, &loaded.model, table, &transport, options).map_err(|e| match e {
        RunError::Table(m) => CliError::model(m).into(),
        RunError::Unreachable {
            error,
            completed,
            partial,
        } => RunFailure {
            error: CliError {
                exit: Exit::Unreachable,
                message: format!("{url}: {error} after {completed} tests"),
            },
            partial,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Certified,
    FailedTests,
    BelowThreshold,
    NoEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub certified: bool,
    pub reason: Reason,
    pub tests: u64,
    pub failed_tests: u64,
    pub harness_errors: u64,
    pub single_use_reliability: f64,
    pub threshold: f64,
}

impl Verdict {
    pub fn exit(&self) -> Exit {
        if self.certified {
            Exit::Certified
        } else {
            Exit::NotCertified
        }
    }
}

/// Certified iff at least one test ran, none failed, and SUR reaches the
/// threshold.
pub fn evaluate(report: &CertificationReport, threshold: f64) -> Verdict {
    let t = &report.totals;
    let reason = if t.tests == 0 || t.executed_stimuli == 0 {
        Reason::NoEvidence
    } else if t.failed_tests > 0 {
        Reason::FailedTests
    } else if report.single_use_reliability < threshold {
        Reason::BelowThreshold
    } else {
        Reason::Certified
    };
    Verdict {
        certified: reason == Reason::Certified,
        reason,
        tests: t.tests,
        failed_tests: t.failed_tests,
        harness_errors: t.harness_errors,
        single_use_reliability: report.single_use_reliability,
        threshold,
    }
}

pub fn check_threshold(threshold: f64) -> Result<f64, CliError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(threshold)
    } else {
        Err(CliError::config(format!(
            "threshold {threshold} must lie strictly between 0 and 1"
        )))
    }
}

/// Builds the report for `record` and writes report and verdict files.
pub fn report(
    model: &UsageModel,
    record: &TestRecord,
    threshold: f64,
    out: &Path,
) -> Result<(CertificationReport, Verdict), CliError> {
    let stats = ChainStatistics::analyze(model).map_err(|e| CliError::model(e.to_string()))?;
    let report = render_report(model, record, &stats).map_err(|e| CliError::model(e.to_string()))?;
    let verdict = evaluate(&report, threshold);
    write(out, "report.txt", &report.to_text())?;
    write(out, "report.json", &report.to_json())?;
    write(
        out,
        "verdict.json",
        &serde_json::to_string_pretty(&verdict).expect("serializable"),
    )?;
    Ok((report, verdict))
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub model: Option<PathBuf>,
    pub canon: Option<PathBuf>,
    pub composition: Composition,
    pub target: ServerTarget,
    pub threshold: f64,
    pub out: PathBuf,
    pub keep_partial: bool,
}

pub struct PipelineOutcome {
    pub warnings: Vec<String>,
    pub suite: Suite,
    pub record: TestRecord,
    pub report: CertificationReport,
    pub verdict: Verdict,
}

/// Validate, analyze, generate, run and report, writing every artifact.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, CliError> {
    let threshold = check_threshold(config.threshold)?;
    let loaded = load_model(config.model.as_deref(), config.canon.as_deref())?;
    write_analysis(&config.out, &analyze(&loaded.model)?)?;
    let (suite, warnings) = generate(&loaded.model, config.composition);
    write(&config.out, "suite.jsonl", &suite.to_jsonl())?;
    let record = match run_suite(&loaded, &suite, &config.target, config.keep_partial) {
        Ok(r) => r,
        Err(failure) => {
            if let Some(p) = failure.partial {
                write(&config.out, "record.partial.json", &p.to_json())?;
            }
            return Err(failure.error);
        }
    };
    write(&config.out, "record.json", &record.to_json())?;
    let (report, verdict) = report(&loaded.model, &record, threshold, &config.out)?;
    Ok(PipelineOutcome {
        warnings,
        suite,
        record,
        report,
        verdict,
    })
}

/// Writes the suite file for `generate`.
pub fn write_suite(dir: &Path, suite: &Suite) -> Result<PathBuf, CliError> {
    write(dir, "suite.jsonl", &suite.to_jsonl())
}

/// Writes the record file for `run` (or its partial form).
pub fn write_record(dir: &Path, record: &TestRecord, partial: bool) -> Result<PathBuf, CliError> {
    write(
        dir,
        if partial { "record.partial.json" } else { "record.json" },
        &record.to_json(),
    )
}
