use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod compare;
mod plan;
mod run;
mod verify;

use plan::PlanArgs;

#[derive(Parser)]
#[command(name = "indblock", version, about = "Independent block sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of a plan and write per-seed and seed-averaged traces.
    Run {
        #[command(flatten)]
        plan: PlanArgs,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Merge seed-averaged traces into one CSV with a column per run.
    Compare(CompareArgs),
    /// Run an oracle suite and print a JSON report.
    Verify {
        /// One of moments, rates, reductions, comm, async.
        suite: String,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CompareArgs {
    /// Seed-averaged CSVs written by `run`; when absent the plan is run.
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    plan: PlanArgs,
    /// Metric to merge (subopt, dist_sq, grad_sq, lyapunov).
    #[arg(long, default_value = "subopt")]
    metric: String,
    /// Output CSV; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Process exit status.
pub enum Failure {
    /// Bad configuration, bad input or a run error.
    Config(anyhow::Error),
    /// A verification suite reported a failed invariant.
    Verification,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self::Config(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { plan, out } => run::cmd_run(&plan, &out),
        Command::Compare(c) => compare::cmd_compare(&c.inputs, &c.plan, &c.metric, c.out.as_deref()),
        Command::Verify { suite, report } => verify::cmd_verify(&suite, report.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(2),
    }
}
