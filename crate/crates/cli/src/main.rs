use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use des_server::{FaultConfig, Preset, ServerConfig};
use usecert_cli::{
    analyze, check_threshold, generate, load_model, load_record, load_suite, report, run_pipeline, run_suite,
    write_analysis, write_record, write_suite, CliError, Exit, PipelineConfig, ServerTarget, Verdict,
    DEFAULT_THRESHOLD,
};
use usecert_core::suite::Composition;

#[derive(Parser)]
#[command(
    name = "usecert",
    version,
    about = "Statistical usage-based testing and certification"
)]
struct Cli {
    /// Usage model in TML; the bundled data exchange model when omitted.
    #[arg(long, global = true, env = "USECERT_MODEL")]
    model: Option<PathBuf>,
    /// Canonical state table for the model.
    #[arg(long, global = true, env = "USECERT_CANON")]
    canon: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model and canonical table.
    Validate,
    /// Print chain statistics.
    Analyze {
        #[arg(long, env = "USECERT_OUT")]
        out: Option<PathBuf>,
    },
    /// Generate a test suite.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, env = "USECERT_OUT", default_value = "usecert-out")]
        out: PathBuf,
    },
    /// Run the reference server.
    Serve {
        #[command(flatten)]
        faults: FaultArgs,
        #[arg(long, env = "DES_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "DES_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        enable_reset: bool,
    },
    /// Execute a suite file against a server.
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, env = "USECERT_OUT", default_value = "usecert-out")]
        out: PathBuf,
        #[arg(long)]
        keep_partial: bool,
    },
    /// Compute reliability statistics and the verdict for a record.
    Report {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, env = "USECERT_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, env = "USECERT_OUT", default_value = "usecert-out")]
        out: PathBuf,
    },
    /// Validate, analyze, generate, run and report in one go.
    Certify {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, env = "USECERT_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, env = "USECERT_OUT", default_value = "usecert-out")]
        out: PathBuf,
        #[arg(long)]
        keep_partial: bool,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, env = "USECERT_RANDOM", default_value_t = 5_000)]
    random: usize,
    #[arg(long, env = "USECERT_WEIGHTED", default_value_t = 200)]
    weighted: usize,
    /// Include the minimum-coverage tests.
    #[arg(long, env = "USECERT_MIN_COVERAGE", default_value_t = true, num_args = 0..=1,
          default_missing_value = "true", action = clap::ArgAction::Set)]
    min_coverage: bool,
    #[arg(long, env = "USECERT_SEED", default_value_t = 1)]
    seed: u64,
}

impl GenArgs {
    fn composition(&self) -> Composition {
        Composition {
            min_coverage: self.min_coverage,
            weighted: self.weighted,
            random: self.random,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Fixed,
    New,
    Custom,
}

#[derive(Args)]
struct FaultArgs {
    #[arg(long, value_enum, env = "USECERT_VARIANT", default_value = "fixed")]
    variant: Variant,
    /// Seeded fault to enable; requires `--variant custom`.
    #[arg(long = "bug")]
    bugs: Vec<String>,
}

impl FaultArgs {
    fn faults(&self) -> Result<FaultConfig, CliError> {
        match self.variant {
            Variant::Fixed | Variant::New if !self.bugs.is_empty() => {
                Err(CliError::config("--bug is only valid with --variant custom"))
            }
            Variant::Fixed => Ok(FaultConfig::preset(Preset::Fixed)),
            Variant::New => Ok(FaultConfig::preset(Preset::New)),
            Variant::Custom => {
                let mut f = FaultConfig::default();
                for b in &self.bugs {
                    f.enable(b).map_err(|e| CliError::config(e.to_string()))?;
                }
                Ok(f)
            }
        }
    }
}

#[derive(Args)]
struct TargetArgs {
    /// Test an already running server instead of starting one.
    #[arg(long, env = "USECERT_SERVER_URL", conflicts_with_all = ["variant", "bugs"])]
    server_url: Option<String>,
    #[command(flatten)]
    faults: FaultArgs,
}

impl TargetArgs {
    fn target(&self) -> Result<ServerTarget, CliError> {
        match &self.server_url {
            Some(url) => Ok(ServerTarget::External(url.clone())),
            None => Ok(ServerTarget::Local(self.faults.faults()?)),
        }
    }
}

fn print_verdict(v: &Verdict) {
    println!(
        "verdict: {} ({}) tests={} failed={} SUR={:.6} threshold={}",
        if v.certified { "CERTIFIED" } else { "NOT CERTIFIED" },
        serde_json::to_value(v.reason)
            .expect("serializable")
            .as_str()
            .unwrap_or_default(),
        v.tests,
        v.failed_tests,
        v.single_use_reliability,
        v.threshold
    );
}

fn execute(cli: Cli) -> Result<Exit, CliError> {
    let model = cli.model.as_deref();
    let canon = cli.canon.as_deref();
    match cli.command {
        Command::Validate => {
            let loaded = load_model(model, canon)?;
            println!(
                "model {} is valid: {} states, {} arcs",
                loaded.model.name(),
                loaded.model.state_count(),
                loaded.model.arcs().len()
            );
            Ok(Exit::Certified)
        }
        Command::Analyze { out } => {
            let loaded = load_model(model, canon)?;
            let report = analyze(&loaded.model)?;
            print!("{}", report.to_text());
            if let Some(dir) = out {
                write_analysis(&dir, &report)?;
            }
            Ok(Exit::Certified)
        }
        Command::Generate { gen, out } => {
            let loaded = load_model(model, canon)?;
            let (suite, warnings) = generate(&loaded.model, gen.composition());
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let path = write_suite(&out, &suite)?;
            println!(
                "{} tests, {} stimuli -> {}",
                suite.cases.len(),
                suite.stimulus_count(),
                path.display()
            );
            Ok(Exit::Certified)
        }
        Command::Serve {
            faults,
            host,
            port,
            enable_reset,
        } => {
            let faults = faults.faults()?;
            let config = ServerConfig {
                host,
                port,
                enable_reset,
                faults,
            };
            let handle =
                des_server::spawn(config).map_err(|e| CliError::config(format!("cannot start server: {e}")))?;
            println!("listening on {} (faults: {faults})", handle.url());
            loop {
                std::thread::park();
            }
        }
        Command::Run {
            suite,
            target,
            out,
            keep_partial,
        } => {
            let loaded = load_model(model, canon)?;
            let suite = load_suite(&loaded.model, &suite)?;
            match run_suite(&loaded, &suite, &target.target()?, keep_partial) {
                Ok(record) => {
                    let path = write_record(&out, &record, false)?;
                    let t = record.totals();
                    println!("{} tests, {} failed -> {}", t.tests, t.failed_tests, path.display());
                    Ok(Exit::Certified)
                }
                Err(failure) => {
                    if let Some(p) = failure.partial {
                        let path = write_record(&out, &p, true)?;
                        eprintln!("partial record -> {}", path.display());
                    }
                    Err(failure.error)
                }
            }
        }
        Command::Report { record, threshold, out } => {
            let threshold = check_threshold(threshold)?;
            let loaded = load_model(model, canon)?;
            let record = load_record(&loaded.model, &record)?;
            let (report, verdict) = report(&loaded.model, &record, threshold, &out)?;
            print!("{}", report.to_text());
            print_verdict(&verdict);
            Ok(verdict.exit())
        }
        Command::Certify {
            gen,
            target,
            threshold,
            out,
            keep_partial,
        } => {
            let config = PipelineConfig {
                model: cli.model.clone(),
                canon: cli.canon.clone(),
                composition: gen.composition(),
                target: target.target()?,
                threshold,
                out,
                keep_partial,
            };
            let outcome = run_pipeline(&config)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.report.to_text());
            print_verdict(&outcome.verdict);
            Ok(outcome.verdict.exit())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Config as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
