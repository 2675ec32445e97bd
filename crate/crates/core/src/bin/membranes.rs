use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use membranes::cli::{self, RunOptions, RunOutcome, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "membranes",
    version,
    about = "Two-membranes and obstacle problems for nonlocal operators"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, check residuals, run the configured diagnostics.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter grid such as `problem.kernel2.s=0.5,0.7;problem.nodes=65,129`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel cells; defaults to MEMBRANES_WORKERS, then the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve an obstacle problem and compute the frequency at a contact point.
    Frequency {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and fit exponents at `auto` (free-boundary nodes) or at `x[,y][;x[,y]...]`.
    Exponent {
        config: PathBuf,
        #[arg(long, default_value = "auto")]
        at: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(o: &RunOutcome) {
    let s = &o.summary;
    match &s.error {
        Some(e) => eprintln!("error: {e}"),
        None => println!(
            "{}: exit {} converged={} max_residual={:.3e}{}{}",
            o.dir.display(),
            o.exit_code,
            s.converged,
            s.max_residual,
            s.exponent_1
                .map(|a| format!(" exponent_1={a:.4}"))
                .unwrap_or_default(),
            s.gap.map(|g| format!(" gap={g:.4}")).unwrap_or_default(),
        ),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command {
        Command::Solve { config, out } => {
            let o = cli::run_file(
                &config,
                &RunOptions {
                    out,
                    ..RunOptions::default()
                },
            );
            report(&o);
            o.exit_code
        }
        Command::Frequency { config, out } => {
            let o = cli::run_file(
                &config,
                &RunOptions {
                    out,
                    force_frequency: true,
                    ..RunOptions::default()
                },
            );
            report(&o);
            o.exit_code
        }
        Command::Exponent { config, at, out } => match cli::parse_anchor_spec(&at) {
            Ok(anchors) => {
                let o = cli::run_file(
                    &config,
                    &RunOptions {
                        out,
                        anchors: Some(anchors),
                        ..RunOptions::default()
                    },
                );
                report(&o);
                o.exit_code
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Command::Sweep {
            config,
            grid,
            out,
            workers,
        } => {
            let o = cli::sweep_file(&config, &grid, out, cli::worker_count(workers));
            for (_, cell) in &o.rows {
                report(cell);
            }
            println!("summary: {}", o.dir.join("summary.csv").display());
            o.exit_code
        }
    };
    ExitCode::from(code as u8)
}
