use std::io;
use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metaspec_core::harness::{compare_report, evaluate_checkpoint, run_experiment, write_task_evaluations, RunSetup};
use metaspec_core::Error;

#[derive(Parser)]
#[command(name = "metaspec", version, about = "Meta-learned power allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm and write metrics, logs and a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `seed` key of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on held-out tasks and print per-task CSV.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Held-out task indices: `a..b`, `a..=b` or a single index.
        #[arg(long, value_parser = parse_range)]
        tasks: Range<u64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align metrics logs and summarize their final windows.
    Compare {
        #[arg(long, num_args = 2.., required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_range(text: &str) -> Result<Range<u64>, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("`{s}`: {e}"));
    let range = if let Some((a, b)) = text.split_once("..=") {
        num(a)?..num(b)?.checked_add(1).ok_or("range end overflows")?
    } else if let Some((a, b)) = text.split_once("..") {
        num(a)?..num(b)?
    } else {
        let n = num(text)?;
        n..n + 1
    };
    if range.is_empty() {
        return Err(format!("empty task range `{text}`"));
    }
    Ok(range)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Divergence(_) => 3,
        Error::Config(_) | Error::Schema(_) | Error::Checkpoint { .. } => 2,
        Error::Io(e) if e.kind() == io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut setup = RunSetup::load(&config)?;
            if let Some(seed) = seed {
                setup.run.seed = seed;
            }
            let output = run_experiment(&setup)?;
            output.write_to(&out)?;
            let last = output.metrics.final_window();
            eprintln!(
                "{}: {} episodes, final throughput {:.2} Mbps, fairness {:.3} -> {}",
                setup.run.algorithm,
                output.episodes_consumed,
                last.throughput_mbps,
                last.fairness,
                out.display()
            );
        }
        Command::Evaluate { checkpoint, tasks, out } => {
            let rows = evaluate_checkpoint(&checkpoint, tasks)?;
            match out {
                Some(path) => write_task_evaluations(&rows, std::fs::File::create(path)?)?,
                None => write_task_evaluations(&rows, io::stdout().lock())?,
            }
        }
        Command::Compare { logs, out } => {
            let rows = compare_report(&logs, &out)?;
            for r in rows {
                eprintln!(
                    "{:<24} throughput {:>8.2}  violations {:>8.1}  fairness {:.3}",
                    r.label,
                    r.final_window.throughput_mbps,
                    r.final_window.total_violations(),
                    r.final_window.fairness
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
