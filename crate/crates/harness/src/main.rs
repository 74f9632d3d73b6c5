use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snse_harness::config::{Experiment, SCHEMA_TEXT};
use snse_harness::{run, tables, ExperimentConfig, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "snse", version, about = "Stochastic Navier-Stokes experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, env = "SNSE_SEED", value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, env = "SNSE_WORKERS", value_name = "N")]
    workers: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment.
    Run(RunArgs),
    /// Run the invariant suite on the configured setup.
    Verify(RunArgs),
    /// Write CSV tables and plot scripts for the reports in a manifest.
    EmitTables {
        #[arg(value_name = "MANIFEST")]
        manifest: PathBuf,
    },
    /// Print the annotated config reference.
    PrintConfigSchema,
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&e.record()).expect("error record serializes"));
    ExitCode::from(e.exit_code() as u8)
}

fn execute(args: &RunArgs, force_verify: bool) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    Overrides { seed: args.seed, workers: args.workers, out: args.out.clone() }.apply(&mut cfg);
    if force_verify && !matches!(cfg.experiment, Experiment::Verify { .. }) {
        cfg.experiment = Experiment::Verify { gradient_trials: 20, fixtures: 100 };
    }
    match run(&cfg) {
        Ok(outcome) => {
            if let Some(rep) = &outcome.verify {
                for i in &rep.items {
                    println!("{} {} measured={:e} threshold={:e} {}", if i.passed { "PASS" } else { "FAIL" }, i.name, i.measured, i.threshold, i.detail);
                }
            }
            println!("{}", outcome.manifest_path.display());
            match &outcome.error {
                Some(e) => fail(e),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(a) => execute(a, false),
        Command::Verify(a) => execute(a, true),
        Command::EmitTables { manifest } => match tables::emit_tables(manifest) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::PrintConfigSchema => {
            print!("{SCHEMA_TEXT}");
            ExitCode::SUCCESS
        }
    }
}
