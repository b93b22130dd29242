//! `latentid`: graphical checks, latent-variable identification, sharp
//! counterfactual bounds and synthetic data from the command line.
//!
//! Exit status: 0 success, 2 criterion does not hold, 3 not identified or
//! infeasible, 4 input or usage error.

mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latentid::exec::Execution;

use commands::{Ctx, Outcome};
use report::{Failure, RunReport, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "latentid", version, about = "Causal effects with an unobserved exposure or outcome")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test d-separation, the back-door or the front-door criterion on a diagram.
    Check(commands::check::CheckArgs),
    /// Recover a latent variable's joint law from two proxy families.
    Identify(commands::identify::IdentifyArgs),
    /// Sharp bounds on a binary outcome's interventional probability.
    Bounds(commands::bounds::BoundsArgs),
    /// Draw a random identifiable latent-class model and write its observables.
    Simulate(commands::simulate::SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Print the JSON run report to stdout instead of the summary.
    #[arg(long)]
    json: bool,
    /// Also write the JSON run report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl OutputArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let (name, output) = match &cli.command {
        Command::Check(a) => ("check", a.output.clone()),
        Command::Identify(a) => ("identify", a.output.clone()),
        Command::Bounds(a) => ("bounds", a.output.clone()),
        Command::Simulate(a) => ("simulate", a.output.clone()),
    };
    let mut ctx = Ctx::new(output.exec());
    let result = match &cli.command {
        Command::Check(a) => commands::check::run(a, &mut ctx),
        Command::Identify(a) => commands::identify::run(a, &mut ctx),
        Command::Bounds(a) => commands::bounds::run(a, &mut ctx),
        Command::Simulate(a) => commands::simulate::run(a, &mut ctx),
    };
    ExitCode::from(finish(name, &output, ctx, result))
}

fn finish(command: &str, output: &OutputArgs, ctx: Ctx, result: Result<Outcome, Failure>) -> u8 {
    let Ctx {
        inputs,
        parameters,
        mut diagnostics,
        ..
    } = ctx;
    let (outputs, summary, exit) = match result {
        Ok(o) => (o.outputs, o.summary, o.exit),
        Err(f) => {
            diagnostics.push(f.diagnostic);
            (serde_json::Value::Null, String::new(), f.exit)
        }
    };
    for d in &diagnostics {
        eprintln!("latentid: {d}");
    }
    let report = RunReport {
        command: command.to_string(),
        inputs,
        parameters,
        outputs,
        diagnostics,
        exit_status: exit,
    };
    let text = report.to_pretty();
    if let Some(path) = &output.out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("latentid: error[io]: cannot write {}: {e}", path.display());
            return EXIT_INPUT;
        }
    }
    let mut stdout = std::io::stdout().lock();
    let written = if output.json {
        stdout.write_all(text.as_bytes())
    } else {
        stdout.write_all(summary.as_bytes())
    };
    if written.is_err() {
        return EXIT_INPUT;
    }
    exit
}
