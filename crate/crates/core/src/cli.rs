//! Command-line surface of the `degenbranch` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit_constants::{
    anisotropic_cubic_integral_routes, c1, c2, c2_triple_integral, large_dim_covariance, ConstantResult,
};
use crate::report::{self, RunManifest, RunStatus, SampleFormat};
use crate::stable_motion::{Regime, StableIndexVector};
use crate::test_function::GaussianTestFunction;
use crate::verify_harness::{run_experiment, ExperimentConfig, ExperimentOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "degenbranch", version, about = "Occupation-time fluctuations of degenerate stable branching systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the limit constant for an index vector.
    Constants(ConstantsArgs),
    /// Run an experiment and write its outputs.
    Simulate(RunArgs),
    /// Run an experiment and fail when an acceptance gate fails.
    Verify(RunArgs),
    /// Run the oracle and invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Stability indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Needed for the critical-dimension constant.
    #[arg(long, default_value_t = 0.5)]
    pub kappa: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "DEGENBRANCH_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Format of the raw sample file.
    #[arg(long, value_enum, default_value_t = SampleFormat::Jsonl)]
    pub format: SampleFormat,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 20_261_019)]
    pub seed: u64,
}

/// Reads and validates a config; errors carry the JSON path of the field.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct ConstantsRecord {
    alphas: Vec<f64>,
    bar_alpha: f64,
    regime: Regime,
    gamma: f64,
    theta: f64,
    kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cubic_integral: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c1: Option<ConstantResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2: Option<ConstantResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2_truncation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    large_dim_covariance: Option<f64>,
}

fn constants(args: &ConstantsArgs) -> Result<ConstantsRecord> {
    let idx = StableIndexVector::new(args.alphas.clone())?;
    let mut rec = ConstantsRecord {
        alphas: args.alphas.clone(),
        bar_alpha: idx.bar_alpha(),
        regime: idx.regime(),
        gamma: args.gamma,
        theta: args.theta,
        kappa: args.kappa,
        cubic_integral: None,
        c1: None,
        c2: None,
        c2_truncation: None,
        large_dim_covariance: None,
    };
    match idx.regime() {
        Regime::Critical => {
            let r = anisotropic_cubic_integral_routes(&idx)?;
            rec.cubic_integral = Some(serde_json::json!({
                "closed_form": r.closed_form,
                "quadrature": r.quadrature.value,
                "quadrature_abs_error": r.quadrature.abs_error,
            }));
            rec.c1 = Some(c1(&idx, args.gamma, args.theta, args.kappa)?);
        }
        Regime::Intermediate => {
            rec.c2 = Some(c2(&idx, args.gamma, args.theta)?);
            rec.c2_truncation = Some(c2_triple_integral(idx.bar_alpha(), args.theta)?.truncation);
        }
        Regime::Large => {
            let phi = GaussianTestFunction::standard(idx.dim());
            rec.large_dim_covariance = Some(large_dim_covariance(&phi, &phi, &idx, args.gamma, args.theta)?);
        }
        found @ Regime::Subcritical => {
            return Err(Error::UnsupportedRegime {
                requested: "limit constants".into(),
                found,
                window: "bar_alpha > 1".into(),
            })
        }
    }
    Ok(rec)
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs the experiment and writes every output; the manifest is written
/// first as incomplete and finalized with digests at the end.
pub fn run_to_dir(
    command: &str,
    config: &ExperimentConfig,
    workers: usize,
    out: &Path,
    format: SampleFormat,
) -> Result<ExperimentOutcome> {
    std::fs::create_dir_all(out)?;
    let clock = Instant::now();
    let mut manifest = RunManifest::start(command, config, workers);
    manifest.write(out)?;
    let outcome = run_experiment(config, workers)?;
    let paths = report::output_paths(out, format);
    report::write_samples(&paths[0], &outcome.samples, format)?;
    report::write_json(&paths[1], &outcome.summary)?;
    report::write_variance_table(&paths[2], &outcome.summary)?;
    manifest.outputs = paths.iter().map(|p| report::digest_file(p)).collect::<Result<_>>()?;
    manifest.finished_at = Some(chrono::Utc::now().to_rfc3339());
    manifest.runtime_seconds = Some(clock.elapsed().as_secs_f64());
    manifest.status = RunStatus::Complete;
    manifest.write(out)?;
    Ok(outcome)
}

fn run_command(name: &str, args: &RunArgs) -> Result<ExperimentOutcome> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let workers = args.workers.unwrap_or_else(default_workers).max(1);
    run_to_dir(name, &config, workers, &args.out, args.format)
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } => EXIT_INVALID_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Constants(args) => match constants(&args) {
            Ok(rec) => {
                println!("{}", serde_json::to_string(&rec).expect("serializable record"));
                EXIT_OK
            }
            Err(e) => report_error(&e),
        },
        Command::Simulate(args) => match run_command("simulate", &args) {
            Ok(_) => {
                println!("wrote {}", args.out.display());
                EXIT_OK
            }
            Err(e) => report_error(&e),
        },
        Command::Verify(args) => match run_command("verify", &args) {
            Ok(outcome) => {
                for g in &outcome.summary.gates {
                    let tag = if g.passed { "PASS" } else { "FAIL" };
                    let note = if g.engineering_choice { " [engineering gate]" } else { "" };
                    println!("{tag} {}: {}{note}", g.id, g.detail);
                }
                if outcome.summary.all_gates_pass() {
                    EXIT_OK
                } else {
                    EXIT_FAILURE
                }
            }
            Err(e) => report_error(&e),
        },
        Command::Selftest(args) => match crate::selftest::run_all(args.seed) {
            Ok(checks) => {
                for c in &checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                if checks.iter().all(|c| c.passed) {
                    EXIT_OK
                } else {
                    EXIT_FAILURE
                }
            }
            Err(e) => report_error(&e),
        },
    }
}

pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}
