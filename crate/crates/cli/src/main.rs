//! `usd`: optimal unambiguous discrimination from the command line.

mod commands;
mod exit;
mod io;
mod verify;

use clap::{Parser, Subcommand};

use commands::{SolveArgs, WeightArgs};
use exit::Failure;

#[derive(Parser, Debug)]
#[command(name = "usd", version, about = "Optimal unambiguous discrimination of pure states")]
struct Cli {
    /// Worker threads for grid evaluation and simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximize the mean efficiency.
    Optimize {
        #[command(flatten)]
        solve: SolveArgs,
        /// Write efficiency samples on the seeding grid as CSV.
        #[arg(long)]
        dump_grid: Option<String>,
    },
    /// Build the detection operators and the inconclusive element.
    Povm {
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Build the unitary extension of the POVM.
    Neumark {
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        weights: WeightArgs,
        /// Use the 2N x 2N layout; needs an ancilla of dimension N.
        #[arg(long)]
        tensor: bool,
    },
    /// Sample the measurement.
    Simulate {
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        /// Sampling blocks; results are reproducible for a fixed count (default: threads).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-check every invariant of a stored document or state file.
    Verify {
        input: String,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Write a state file for a parametric family.
    Gen {
        /// Family as JSON, e.g. '{"family":"equal-overlap","n":4,"s":0.25}'.
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        spec_file: Option<String>,
        #[arg(short, long)]
        output: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(String, Option<String>), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::parse("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::parse(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Optimize { solve, dump_grid } => {
            let out = solve.output.clone();
            commands::optimize(&solve, dump_grid.as_deref()).map(|t| (t, out))
        }
        Command::Povm { solve, weights } => {
            commands::povm_cmd(&solve, &weights).map(|t| (t, solve.output))
        }
        Command::Neumark {
            solve,
            weights,
            tensor,
        } => commands::neumark_cmd(&solve, &weights, tensor).map(|t| (t, solve.output)),
        Command::Simulate {
            solve,
            weights,
            trials,
            workers,
        } => commands::simulate_cmd(&solve, &weights, trials, workers).map(|t| (t, solve.output)),
        Command::Verify { input, output } => verify::verify(&input).map(|t| (t, output)),
        Command::Gen {
            spec,
            spec_file,
            output,
        } => {
            let spec = commands::parse_spec(spec.as_deref(), spec_file.as_deref())?;
            commands::gen_cmd(&spec).map(|t| (t, output))
        }
    }
}

fn output_path(cli: &Cli) -> Option<String> {
    match &cli.command {
        Command::Optimize { solve, .. }
        | Command::Povm { solve, .. }
        | Command::Neumark { solve, .. }
        | Command::Simulate { solve, .. } => solve.output.clone(),
        Command::Verify { output, .. } | Command::Gen { output, .. } => output.clone(),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::PARSE } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let path = output_path(&cli);
    let code = match run(cli) {
        Ok((text, out)) => match io::write_output(&text, out.as_deref()) {
            Ok(()) => exit::OK,
            Err(f) => {
                eprintln!("error: {}", f.message);
                f.code
            }
        },
        Err(f) => {
            if let Some(text) = &f.output {
                if let Err(w) = io::write_output(text, path.as_deref()) {
                    eprintln!("error: {}", w.message);
                }
            }
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    std::process::exit(code);
}
