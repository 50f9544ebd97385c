use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use saddlecert::dynamics::{run, IterationConfig};
use saddlecert::experiment::{
    certify_config, classify_config, counterexample_config, monte_carlo_avoidance,
    AvoidanceSetup, Command, ExperimentConfig,
};
use saddlecert::sampling::{rng_for, streams};
use saddlecert::Error;
use serde::Serialize;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

/// Projected Riemannian gradient descent: step-size certificates, fixed-point
/// classification, saddle avoidance and the chart-switch counterexample.
#[derive(Debug, Parser)]
#[command(name = "saddlecert", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count for constant estimation and verification.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Safety factor applied to sampled constants.
    #[arg(long, global = true)]
    safety: Option<f64>,
    /// Step size, overriding `iteration.step_size`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Run avoidance even when the step size is not certified.
    #[arg(long, global = true)]
    force: bool,
    /// Report path; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Estimate constants, compute the step bound and verify the immersion chain.
    Certify,
    /// Spectrum of Dg at fixed points.
    Classify,
    /// Monte Carlo saddle-avoidance experiment.
    Avoidance,
    /// Sweep det(Dg) in stereographic charts across the pole crossing.
    Counterexample,
    /// Single trajectory.
    Run,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Certify => Command::Certify,
            Cmd::Classify => Command::Classify,
            Cmd::Avoidance => Command::Avoidance,
            Cmd::Counterexample => Command::Counterexample,
            Cmd::Run => Command::Run,
        }
    }
}

/// A failure with its exit status and machine-readable tag.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn validation(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_VALIDATION,
            kind: "validation".into(),
            message: e.to_string(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self {
            code: EXIT_FAILURE,
            kind: "io".into(),
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: EXIT_FAILURE,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

fn error_object(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_object("usage", &e.kind().to_string()));
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", error_object(&f.kind, &f.message));
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::validation("config: --config PATH is required"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("config: {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("config: {e}")))?;

    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.samples = samples;
    }
    if let Some(safety) = cli.safety {
        cfg.safety = safety;
    }
    if let Some(alpha) = cli.alpha {
        match cfg.iteration.as_mut() {
            Some(it) => it.step_size = alpha,
            None => cfg.iteration = Some(IterationConfig::new(alpha)),
        }
    }
    if cli.force {
        cfg.force = true;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    cfg.validate().map_err(Failure::validation)?;

    let requested = Command::from(cli.command);
    if let Some(c) = cfg.command {
        if c != requested {
            return Err(Failure::validation(format!(
                "command: config names {c:?} but {requested:?} was requested"
            )));
        }
    }
    let needs_iteration = matches!(requested, Command::Classify | Command::Avoidance | Command::Run);
    if needs_iteration && cfg.iteration.is_none() {
        return Err(Failure::validation("iteration: required for this command"));
    }
    if requested == Command::Counterexample && cfg.counterexample.is_none() {
        return Err(Failure::validation("counterexample: required for this command"));
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let report_path = cli.out.clone().or_else(|| cfg.output.report.as_ref().map(PathBuf::from));
    let csv_path = cfg.output.csv.as_ref().map(PathBuf::from);
    let m = cfg.manifold()?;
    let obj = cfg.objective()?;

    let (report, csv) = match cli.command {
        Cmd::Certify => (to_json(&certify_config(&cfg)?), None),
        Cmd::Classify => (to_json(&classify_config(&cfg)?), None),
        Cmd::Avoidance => {
            let setup = AvoidanceSetup::from_config(&cfg)?;
            (to_json(&monte_carlo_avoidance(&m, &obj, &setup)?), None)
        }
        Cmd::Counterexample => {
            let report = counterexample_config(&cfg)?;
            let mut csv = Vec::new();
            report.series.write_csv(&mut csv).expect("writing to memory");
            (to_json(&report), Some(csv))
        }
        Cmd::Run => {
            let x0 = match &cfg.point {
                Some(p) => p.clone(),
                None => m.sample_uniform(&mut rng_for(cfg.seed, streams::GENERIC)),
            };
            let traj = run(&m, &obj, &x0, &cfg.iteration()?)?;
            let mut csv = Vec::new();
            traj.write_csv(&mut csv).expect("writing to memory");
            (to_json(&traj), Some(csv))
        }
    };

    if let (Some(path), Some(bytes)) = (&csv_path, &csv) {
        fs::write(path, bytes).map_err(|e| Failure::io(path, e))?;
    }
    match report_path {
        Some(path) => fs::write(&path, report).map_err(|e| Failure::io(&path, e)),
        None => io::stdout()
            .write_all(report.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}
