use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pfc_harness::{resolve, run, ExperimentKind, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "pfc", version, about = "Layer-wise collapse experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter override, `key=value` with a TOML value; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config file's `kind`
    Run(RunArgs),
    /// Simplex ETF construction checks
    EtfCheck(RunArgs),
    /// Metric curves along the line between two feature files
    Interpolate(RunArgs),
    /// PFC1 monotonicity on seeded paths toward collapse
    Theorem1(RunArgs),
    /// PFC2 monotonicity on seeded short paths toward collapse
    Theorem2(RunArgs),
    /// Gradient descent on the unconstrained feature model
    SolveUfm(RunArgs),
    /// Gradient descent on the data-anchored feature model
    SolveMufm(RunArgs),
    /// Data-anchored model over a grid of anchor strengths
    SweepLambda(RunArgs),
    /// Train the residual network and report per-layer metrics
    TrainResnet(RunArgs),
    /// Per-layer metrics for a stack of feature files
    PfcReport(RunArgs),
    /// Multilayer model against its single-layer collapse
    EquivalenceThm3(RunArgs),
}

impl Command {
    fn split(self) -> (Option<ExperimentKind>, RunArgs) {
        use Command::*;
        match self {
            Run(a) => (None, a),
            EtfCheck(a) => (Some(ExperimentKind::EtfCheck), a),
            Interpolate(a) => (Some(ExperimentKind::Interpolate), a),
            Theorem1(a) => (Some(ExperimentKind::Theorem1), a),
            Theorem2(a) => (Some(ExperimentKind::Theorem2), a),
            SolveUfm(a) => (Some(ExperimentKind::SolveUfm), a),
            SolveMufm(a) => (Some(ExperimentKind::SolveMufm), a),
            SweepLambda(a) => (Some(ExperimentKind::SweepLambda), a),
            TrainResnet(a) => (Some(ExperimentKind::TrainResnet), a),
            PfcReport(a) => (Some(ExperimentKind::PfcReport), a),
            EquivalenceThm3(a) => (Some(ExperimentKind::EquivalenceThm3), a),
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let (kind, args) = cli.command.split();
    let text = match &args.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.clone(),
            source: e,
        })?),
        None if kind.is_none() => return Err(HarnessError::Usage("`run` needs --config".into())),
        None => None,
    };
    let overrides = Overrides {
        kind,
        seed: args.seed,
        out: args.out,
        set: args.set,
    };
    let cfg = resolve(text.as_deref(), &overrides)?;
    let manifest = run(&cfg)?;
    println!(
        "{}: {} artifacts in {}",
        cfg.kind.name(),
        manifest.artifacts.len(),
        cfg.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
