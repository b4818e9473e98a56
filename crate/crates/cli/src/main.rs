use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod plan;
mod sweep;

#[derive(Parser)]
#[command(
    name = "formation",
    version,
    about = "Lane-preference formation planning and lane-sorting simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a planning instance file and print the report.
    Plan {
        file: PathBuf,
        /// Motion mode: 1 (4-neighbour) or 2 (8-neighbour). Overrides the file.
        #[arg(long, value_parser = ["1", "2"])]
        mode: Option<String>,
        /// Special edge conflict types to check, e.g. `1,2,4` or `none`.
        #[arg(long)]
        special_conflicts: Option<String>,
        /// Append the constraint tree of the best assignment.
        #[arg(long)]
        trace: bool,
    },
    /// Run the traffic simulation over a volume sweep and seeds.
    Sim {
        scenario: PathBuf,
        /// fc, rule, or both comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "fc,rule")]
        method: Vec<String>,
        /// Input volumes, vehicles per lane per hour.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        volumes: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Upper bound on the input volume of interlaced formations.
    Capacity {
        /// Formation speed, m/s.
        #[arg(long)]
        vf: f64,
        /// Following gap, m.
        #[arg(long)]
        df: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Plan {
            file,
            mode,
            special_conflicts,
            trace,
        } => plan::run(&file, mode.as_deref(), special_conflicts.as_deref(), trace),
        Command::Sim {
            scenario,
            method,
            volumes,
            seeds,
            out,
        } => sweep::run(&scenario, &method, &volumes, &seeds, &out),
        Command::Capacity { vf, df } => capacity(vf, df),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn capacity(vf: f64, df: f64) -> Result<ExitCode, String> {
    if !(vf.is_finite() && df.is_finite() && vf >= 0.0 && df > 0.0) {
        return Err("need --vf >= 0 and --df > 0".into());
    }
    let cap = formation_core::sim::theoretical_capacity(vf, df);
    println!("{cap} vehicles/(lane*h)");
    Ok(ExitCode::SUCCESS)
}
