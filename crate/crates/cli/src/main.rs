use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use magfloquet::experiment::{self, ExperimentConfig, ExperimentKind, THREADS_ENV};

/// Batch runner for driven magnetic Laplacian experiments.
///
/// Exit status: 0 when every check passes, 2 when a check misses its
/// tolerance at the configured scale, 1 on error.
#[derive(Parser)]
#[command(name = "magfloquet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Floquet-Bloch bands of the periodic operator.
    Bands(RunArgs),
    /// Monodromy quasienergies and propagator diagnostics.
    Quasienergy(RunArgs),
    /// Direct vs gauge-transformed monodromy.
    GaugeCheck(RunArgs),
    /// Wave-operator approximants for a periodic drive.
    Scattering(RunArgs),
    /// Wave-operator approximants for a decaying drive.
    TimeDecaying(RunArgs),
    /// Weighted free resolvent norms.
    ResolventSample(RunArgs),
    /// Check a config without running it.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// `key=value`, dotted keys address sections (e.g. `scattering.n_periods=20`).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to the config's `out`, then `out/<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn output_dir(cfg: &ExperimentConfig, args: &RunArgs) -> PathBuf {
    match (&args.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => Path::new("out").join(cfg.scenario_id()),
    }
}

fn main_inner(cli: Cli) -> anyhow::Result<i32> {
    configure_threads()?;
    let (kind, args) = match &cli.command {
        Command::Bands(a) => (Some(ExperimentKind::Bands), a),
        Command::Quasienergy(a) => (Some(ExperimentKind::Quasienergy), a),
        Command::GaugeCheck(a) => (Some(ExperimentKind::GaugeCheck), a),
        Command::Scattering(a) => (Some(ExperimentKind::Scattering), a),
        Command::TimeDecaying(a) => (Some(ExperimentKind::TimeDecaying), a),
        Command::ResolventSample(a) => (Some(ExperimentKind::ResolventSample), a),
        Command::Validate(a) => (None, a),
    };
    let cfg = ExperimentConfig::load(&args.config, &args.overrides)?;
    let Some(kind) = kind else {
        let report = cfg.validate()?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(0);
    };
    if cfg.kind != kind {
        bail!(
            "config {} declares kind `{}` but `{}` was requested",
            args.config.display(),
            cfg.kind.name(),
            kind.name()
        );
    }
    let out = output_dir(&cfg, args);
    let outcome = experiment::run(&cfg, &out, &args.overrides)?;
    print!("{}", experiment::summary_text(&cfg, &outcome));
    println!("outputs: {}", out.display());
    Ok(outcome.verdict.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
