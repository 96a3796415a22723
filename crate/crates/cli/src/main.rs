use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use symgcp::config::GenConfig;
use symgcp::Error;
use symgcp_cli::{decompose, evaluate, generate, load_run_config, Overrides};

#[derive(Parser)]
#[command(name = "symgcp", version, about = "Generalized CP decompositions of partially symmetric tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a decomposition from several random starts.
    Decompose {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Root seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (overrides the config).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate a symmetric binary tensor with a planted factor.
    Generate {
        /// Generator settings; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score every start of a finished run against a planted factor.
    Evaluate {
        /// CSV of the planted factor.
        #[arg(long)]
        a_star: PathBuf,
        /// Output directory of a `decompose` run.
        #[arg(long)]
        run: PathBuf,
        /// Factor to score, 1-based.
        #[arg(long, default_value_t = 1)]
        cell: usize,
        /// Scores CSV (default: RUN/scores.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Decompose {
            config,
            output,
            seed,
            threads,
        } => {
            let cfg = load_run_config(&config, &Overrides { output, seed, threads })?;
            let report = decompose(&cfg)?;
            for r in &report.inits {
                match (r.objective, &r.error) {
                    (Some(f), None) => println!("init {:3}  objective {f:.6e}  {} ({} iterations)", r.init, r.status, r.iterations),
                    (_, err) => println!("init {:3}  failed: {}", r.init, err.as_deref().unwrap_or("unknown")),
                }
            }
            match report.best() {
                Some(b) => {
                    println!("best init {} objective {:.6e}", b.init, b.objective.unwrap_or(f64::NAN));
                    println!("results in {}", report.output.display());
                    Ok(())
                }
                None => Err(Failure::Runtime("every initialization failed".into())),
            }
        }
        Command::Generate { config, output, seed } => {
            let mut cfg = match &config {
                Some(p) => GenConfig::load(p)?,
                None => GenConfig::parse("", "<defaults>")?,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = output
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Failure::Validation("no output directory: pass --output or set `output`".into()))?;
            let report = generate(&cfg, &dir)?;
            println!(
                "{}-way tensor of size {}: {} nonzeros (fraction {:.5}), {} clamped model entries",
                report.m, report.n, report.nnz, report.nnz_fraction, report.clamped
            );
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Evaluate {
            a_star,
            run,
            cell,
            output,
        } => {
            let out = output.unwrap_or_else(|| run.join("scores.csv"));
            let report = evaluate(&a_star, &run, cell, &out)?;
            for s in &report.scores {
                println!("init {:3}  objective {:.6e}  score {:.4}", s.init, s.objective, s.score);
            }
            println!("best init {} score {:.4}", report.best_init, report.best_score);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
