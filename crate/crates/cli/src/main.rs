//! `timecon`: planning, equilibria and regret under time-indexed discounting.

mod commands;
mod output;
mod reproduce;
mod scenario;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;

#[derive(Parser, Debug)]
#[command(name = "timecon", version, about = "Planning agents whose discounting changes with age")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal policy for one column of the discount matrix.
    Plan(commands::PlanArgs),
    /// Test a discount matrix for time-consistency.
    Consistency(commands::ConsistencyArgs),
    /// Play the policy each self would choose at its own age.
    Rollout(commands::RolloutArgs),
    /// Sub-game perfect equilibria of the game between selves.
    Spe(commands::SpeArgs),
    /// Regret of the mixed policy and the continuity bound.
    Regret(commands::RegretArgs),
    /// Recompute the worked examples and compare with reference values.
    Reproduce(reproduce::ReproduceArgs),
    /// Write a built-in environment as JSON.
    ExportEnv(commands::ExportArgs),
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Plan(a) => commands::plan(a),
        Command::Consistency(a) => commands::consistency(a),
        Command::Rollout(a) => commands::rollout(a),
        Command::Spe(a) => commands::spe(a),
        Command::Regret(a) => commands::regret_cmd(a),
        Command::Reproduce(a) => reproduce::reproduce(a),
        Command::ExportEnv(a) => commands::export_env(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if cli.json {
                output::print_json(&outcome.json);
            } else {
                print!("{}", outcome.text);
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            let budget = matches!(err.downcast_ref::<timecon::Error>(), Some(timecon::Error::BudgetExceeded { .. }));
            ExitCode::from(if budget { 3 } else { 2 })
        }
    }
}
