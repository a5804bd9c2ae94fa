//! `narmax` — derive, simulate, and validate polynomial NARMAX models.
//!
//! Subcommands:
//!
//! * `derive` — turn a stochastic prediction model into a deterministic
//!   simulation model (`--exact`, `--l L`, `--truncate L`, `--noise-zero`).
//! * `simulate` — run a model file over an input series; stochastic models
//!   draw their noise from `--seed` or an explicit `--noise` file.
//! * `montecarlo` — estimate the process's conditional mean by ensemble
//!   averaging and score candidate simulation models against it.
//! * `report` — re-render the summary table of a saved report directory.
//!
//! Exit codes: 0 on success, 1 for usage/parse/derivation errors, 2 when a
//! run diverged (non-finite output).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use narmax_cli::{dsl, harness, report};
use narmax_core::derive::{self, DeriveOptions};
use narmax_core::{sim, NarmaxModel, SimModel};

use dsl::ModelDocument;
use harness::{Execution, ExperimentSpec, InputSpec, RunMode};
use report::SpecEcho;

#[derive(Parser)]
#[command(
    name = "narmax",
    version,
    about = "Derive, simulate, and validate polynomial NARMAX models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive a deterministic simulation model from a prediction model.
    Derive(DeriveArgs),
    /// Run a model over an input series and print k,u,y rows.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of candidate simulation models.
    Montecarlo(MonteCarloArgs),
    /// Print the summary table of an existing report directory.
    Report(ReportArgs),
}

#[derive(Args)]
#[command(group = ArgGroup::new("method").required(true).multiple(false))]
struct DeriveArgs {
    /// Prediction model file.
    #[arg(long)]
    model: PathBuf,
    /// Exact derivation (restricted model class).
    #[arg(long, group = "method")]
    exact: bool,
    /// Unbiased l-approximate derivation of order L.
    #[arg(long, group = "method", value_name = "L")]
    l: Option<u32>,
    /// Truncated derivation of order L (drops residual output terms).
    #[arg(long, group = "method", value_name = "L")]
    truncate: Option<u32>,
    /// Drop every noise-bearing term (the naive simulation model).
    #[arg(long = "noise-zero", group = "method")]
    noise_zero: bool,
    /// Also write the derived model file here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model file (prediction or simulation).
    #[arg(long)]
    model: PathBuf,
    /// Input series: one number per line (# comments allowed).
    #[arg(long)]
    input: PathBuf,
    /// Noise seed for stochastic models.
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit noise series file instead of a seed.
    #[arg(long, conflicts_with = "seed")]
    noise: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Continuous,
    Reset,
}

impl ModeArg {
    fn run_mode(self) -> RunMode {
        match self {
            ModeArg::Continuous => RunMode::Continuous,
            ModeArg::Reset => RunMode::Reset,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ModeArg::Continuous => "continuous",
            ModeArg::Reset => "reset",
        }
    }
}

#[derive(Args)]
struct MonteCarloArgs {
    /// Stochastic prediction model file.
    #[arg(long)]
    model: PathBuf,
    /// Candidate simulation model files.
    #[arg(long, num_args = 1.., required = true, value_name = "FILE")]
    candidates: Vec<PathBuf>,
    /// Number of periods driven through the stochastic model.
    #[arg(long)]
    periods: usize,
    /// Samples per period.
    #[arg(long)]
    samples: usize,
    /// Leading periods excluded from the statistics.
    #[arg(long, default_value_t = 5)]
    discard: usize,
    /// Base seed: the input period uses it, period i's noise uses seed+1+i.
    #[arg(long)]
    seed: u64,
    /// Mean of the random input period.
    #[arg(long, default_value_t = 0.0)]
    input_mean: f64,
    /// Standard deviation of the random input period.
    #[arg(long, default_value_t = 1.0)]
    input_std: f64,
    /// Report directory to write.
    #[arg(long)]
    out: PathBuf,
    /// State handling across periods.
    #[arg(long, value_enum, default_value_t = ModeArg::Continuous)]
    mode: ModeArg,
    /// Run on a single thread (results are identical either way).
    #[arg(long)]
    serial: bool,
    /// Histogram bin count.
    #[arg(long, default_value_t = 50)]
    bins: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Report directory written by `montecarlo`.
    #[arg(long = "in", value_name = "DIR")]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let diverged = err.chain().any(|cause| {
                matches!(
                    cause.downcast_ref::<narmax_core::Error>(),
                    Some(narmax_core::Error::NonFinite { .. })
                )
            });
            ExitCode::from(if diverged { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Derive(args) => run_derive(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Montecarlo(args) => run_montecarlo(args),
        Command::Report(args) => run_report(args),
    }
}

// ───────────────────────── shared loading ──────────────────────────

fn load_document(path: &Path) -> Result<ModelDocument> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))?;
    dsl::parse_document(&text)
        .map_err(anyhow::Error::new)
        .with_context(|| format!("cannot parse {}", path.display()))
}

fn load_prediction(path: &Path) -> Result<(Option<String>, NarmaxModel)> {
    match load_document(path)? {
        ModelDocument::Prediction { name, model } => Ok((name, model)),
        ModelDocument::Simulation { .. } => {
            bail!("{} holds a simulation model; a prediction model is required", path.display())
        }
    }
}

fn load_simulation(path: &Path) -> Result<(Option<String>, SimModel)> {
    match load_document(path)? {
        ModelDocument::Simulation { name, model } => Ok((name, model)),
        ModelDocument::Prediction { .. } => {
            bail!("{} holds a prediction model; a simulation model is required", path.display())
        }
    }
}

/// Reads a numeric series: one value per line, `#` comments and blank lines
/// allowed.
fn load_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read series file {}", path.display()))?;
    let mut values = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(at) => &raw_line[..at],
            None => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed.parse().with_context(|| {
            format!("{}:{}: `{}` is not a number", path.display(), index + 1, trimmed)
        })?;
        values.push(value);
    }
    ensure!(!values.is_empty(), "{} holds no samples", path.display());
    Ok(values)
}

fn derive_options_from_env() -> Result<DeriveOptions<'static>> {
    match std::env::var("NARMAX_TERM_BUDGET") {
        Ok(value) => {
            let budget: usize = value
                .trim()
                .parse()
                .with_context(|| format!("NARMAX_TERM_BUDGET=`{value}` is not an integer"))?;
            ensure!(budget > 0, "NARMAX_TERM_BUDGET must be positive");
            Ok(DeriveOptions { term_budget: budget, ..DeriveOptions::default() })
        }
        Err(std::env::VarError::NotPresent) => Ok(DeriveOptions::default()),
        Err(err) => Err(err).context("NARMAX_TERM_BUDGET is not valid UTF-8"),
    }
}

// ───────────────────────── derive ──────────────────────────

fn run_derive(args: DeriveArgs) -> Result<()> {
    let (name, model) = load_prediction(&args.model)?;
    let options = derive_options_from_env()?;
    let (suffix, derived) = if args.exact {
        ("exact".to_string(), derive::derive_exact(&model)?)
    } else if let Some(l) = args.l {
        (format!("l{l}"), derive::derive_l_approximate(&model, l, &options)?)
    } else if let Some(l) = args.truncate {
        (format!("trunc{l}"), derive::derive_truncated(&model, l, &options)?)
    } else {
        debug_assert!(args.noise_zero);
        ("zeroed".to_string(), derive::derive_noise_zeroed(&model)?)
    };
    print!("{}", dsl::render_simulation_equation(&derived));
    if let Some(out) = args.out {
        let derived_name = name.map(|n| format!("{n}-{suffix}"));
        fs::write(&out, dsl::render_simulation(derived_name.as_deref(), &derived))
            .with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(())
}

// ───────────────────────── simulate ──────────────────────────

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let input = load_series(&args.input)?;
    let output = match load_document(&args.model)? {
        ModelDocument::Simulation { model, .. } => {
            ensure!(
                args.seed.is_none() && args.noise.is_none(),
                "simulation models are deterministic; --seed/--noise apply to prediction models"
            );
            sim::run_sim_model(&model, &input)?
        }
        ModelDocument::Prediction { model, .. } => {
            let noise = match &args.noise {
                Some(path) => {
                    let noise = load_series(path)?;
                    ensure!(
                        noise.len() == input.len(),
                        "noise series has {} samples but the input has {}",
                        noise.len(),
                        input.len()
                    );
                    noise
                }
                None => {
                    let Some(seed) = args.seed else {
                        bail!("stochastic models need --seed N or --noise FILE")
                    };
                    sim::sample_noise(input.len(), seed)
                }
            };
            sim::run_stochastic(&model, &input, &noise)?
        }
    };

    let mut csv = String::from("k,u,y\n");
    for (k, (u, y)) in input.iter().zip(&output).enumerate() {
        use std::fmt::Write as _;
        writeln!(csv, "{},{},{}", k + 1, u, y)?;
    }
    match args.out {
        Some(out) => fs::write(&out, csv)
            .with_context(|| format!("cannot write {}", out.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

// ───────────────────────── montecarlo / report ──────────────────────────

fn candidate_label(path: &Path, name: Option<String>) -> String {
    name.unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| {
            path.display().to_string()
        })
    })
}

fn run_montecarlo(args: MonteCarloArgs) -> Result<()> {
    let (_, model) = load_prediction(&args.model)?;
    let mut candidates = Vec::with_capacity(args.candidates.len());
    let mut candidate_texts = Vec::with_capacity(args.candidates.len());
    for path in &args.candidates {
        let (name, sim_model) = load_simulation(path)?;
        candidate_texts
            .push(dsl::render_simulation_equation(&sim_model).trim_end().to_string());
        candidates.push((candidate_label(path, name), sim_model));
    }

    let spec = ExperimentSpec {
        model: &model,
        candidates: &candidates,
        periods: args.periods,
        samples: args.samples,
        discard: args.discard,
        input: InputSpec { mean: args.input_mean, std: args.input_std },
        base_seed: args.seed,
        mode: args.mode.run_mode(),
        execution: if args.serial { Execution::Serial } else { Execution::Parallel },
        histogram_bins: args.bins,
    };
    let outcome = harness::run_experiment(&spec)?;

    let echo = SpecEcho {
        model: dsl::render_prediction(None, &model).trim_end().to_string(),
        periods: args.periods,
        samples: args.samples,
        discard: args.discard,
        base_seed: args.seed,
        mode: args.mode.label().to_string(),
        input_mean: args.input_mean,
        input_std: args.input_std,
        histogram_bins: args.bins,
    };
    let summary = report::summarize(echo, &candidate_texts, &outcome);
    report::write_report_dir(&args.out, &summary, &outcome)?;
    print!("{}", report::render_table(&summary));
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<()> {
    let summary = report::read_report(&args.dir)?;
    print!("{}", report::render_table(&summary));
    Ok(())
}
