use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dbs_lab::config::parse_config;
use dbs_lab::harness::{self, ExperimentConfig};
use dbs_lab::model::Which;
use dbs_lab::oracle;
use dbs_lab::policy::PolicyKind;
use dbs_lab::report;

const EXIT_USAGE: u8 = 1;
const EXIT_TOLERANCE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dbs-lab",
    version,
    about = "Active anomaly search with switching cost"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (policy, theta) of a configuration and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override trials per hypothesis.
        #[arg(long)]
        trials: Option<usize>,
        /// CSV destination; stdout when omitted (the summary then goes to stderr).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores). Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Report the DBS case criterion per theta.
    CaseCheck {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated thetas; defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
    },
    /// Run one trial and print a per-step trace.
    Trial {
        #[arg(long)]
        config: PathBuf,
        /// dbs, chernoff, dgf, sluggish or sluggish:<p>
        #[arg(long)]
        policy: String,
        #[arg(long)]
        theta: f64,
        /// True target cell, 1-based.
        #[arg(long)]
        cell: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Compare closed forms with brute-force or simulated oracles.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
}

#[derive(Debug, Subcommand)]
enum OracleKind {
    /// Closed-form Chernoff action distribution vs. simplex grid search.
    ChernoffLambda {
        #[arg(long)]
        config: PathBuf,
    },
    /// Wald's SPRT length vs. simulated single-cell SPRTs.
    Sprt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum)]
        which: CellKind,
        #[arg(long, default_value_t = 100_000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CellKind {
    Target,
    Normal,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    parse_config(path).map_err(Failure::usage)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Sweep {
            config,
            seed,
            trials,
            out,
            threads,
        } => {
            let mut config = load(&config)?;
            if let Some(seed) = seed {
                config.master_seed = seed;
            }
            if let Some(trials) = trials {
                config.trials_per_hypothesis = trials;
            }
            let table =
                harness::run_sweep_with_threads(&config, threads).map_err(Failure::usage)?;
            let summary = report::ranking_summary(&table);
            match out {
                Some(path) => {
                    let file = File::create(&path).map_err(|e| {
                        Failure::usage(format!("cannot write {}: {e}", path.display()))
                    })?;
                    let mut w = BufWriter::new(file);
                    report::write_sweep_csv(&table, &mut w)
                        .and_then(|_| w.flush())
                        .map_err(|e| {
                            Failure::usage(format!("cannot write {}: {e}", path.display()))
                        })?;
                    print!("{summary}");
                }
                None => {
                    let stdout = io::stdout();
                    let mut w = stdout.lock();
                    report::write_sweep_csv(&table, &mut w)
                        .and_then(|_| w.flush())
                        .map_err(Failure::usage)?;
                    eprint!("{summary}");
                }
            }
            Ok(())
        }
        Command::CaseCheck { config, thetas } => {
            let config = load(&config)?;
            let thetas = thetas.unwrap_or_else(|| config.theta_grid.clone());
            let check = report::case_check(&config, &thetas).map_err(Failure::usage)?;
            print!("{}", report::format_case_check(&check));
            Ok(())
        }
        Command::Trial {
            config,
            policy,
            theta,
            cell,
            seed,
        } => {
            let config = load(&config)?;
            let kind: PolicyKind = policy.parse().map_err(Failure::usage)?;
            if cell == 0 || cell > config.cells {
                return Err(Failure::usage(format!(
                    "--cell must be in 1..={}, got {cell}",
                    config.cells
                )));
            }
            let (result, steps) = harness::run_trial_traced(&config, kind, theta, cell - 1, seed)
                .map_err(Failure::usage)?;
            print!("{}", report::format_trace(config.cells, &steps, &result));
            Ok(())
        }
        Command::Oracle { kind } => run_oracle(kind),
    }
}

fn run_oracle(kind: OracleKind) -> Result<(), Failure> {
    let passed = match kind {
        OracleKind::ChernoffLambda { config } => {
            let config = load(&config)?;
            let check = oracle::check_chernoff_lambda(&config.model, config.cells);
            println!("closed_form={:?}", check.closed_form);
            println!("grid_search={:?}", check.grid);
            println!(
                "max_abs_diff={} tolerance={}",
                check.max_abs_diff,
                oracle::LAMBDA_TOLERANCE
            );
            check.passed()
        }
        OracleKind::Sprt {
            config,
            theta,
            which,
            runs,
            seed,
        } => {
            let config = load(&config)?;
            if !(theta.is_finite() && theta > 0.0) {
                return Err(Failure::usage(format!(
                    "--theta must be positive, got {theta}"
                )));
            }
            if runs == 0 {
                return Err(Failure::usage("--runs must be positive"));
            }
            let which = match which {
                CellKind::Target => Which::G,
                CellKind::Normal => Which::F,
            };
            let check = oracle::check_sprt(&config.model, theta, which, runs, seed);
            println!("analytic={} reference={}", check.analytic, check.reference);
            println!(
                "monte_carlo={} ci95={} runs={}",
                check.simulated.mean.value, check.simulated.mean.half_width, check.simulated.runs
            );
            println!(
                "abs_diff={} rel_diff={} tolerance={}",
                check.abs_diff,
                check.rel_diff,
                oracle::SPRT_RELATIVE_TOLERANCE
            );
            check.passed()
        }
    };
    if passed {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure {
            code: EXIT_TOLERANCE,
            message: "oracle difference exceeds tolerance".into(),
        })
    }
}
