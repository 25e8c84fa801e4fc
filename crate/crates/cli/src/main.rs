use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cellfree_emf::config::RunConfig;
use cellfree_emf::lra::Metric;
use cellfree_emf::pipeline::{cmd_evaluate, cmd_fit, cmd_generate, cmd_report, Run, CV_ERROR_WARNING};
use cellfree_emf::Error;

/// Rate versus EMF exposure trade-offs in an indoor cell-free mmWave network.
#[derive(Debug, Parser)]
#[command(name = "emf-tradeoff", version)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for inputs and outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample user placements and write the strategy list.
    Generate,
    /// Evaluate every strategy on every scenario.
    Evaluate,
    /// Fit and cross-validate a surrogate for one metric and strategy.
    Fit {
        #[arg(long)]
        metric: Metric,
        /// 1-based strategy id.
        #[arg(long, default_value_t = 9)]
        strategy: usize,
    },
    /// Write the trade-off table, summary and surrogate histograms.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Io { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    }
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let run = Run::new(config, cli.out)?;
    match cli.command {
        Command::Generate => {
            let s = cmd_generate(&run)?;
            println!(
                "wrote {} scenarios (seed {}) and {} strategies to {}",
                s.scenarios,
                s.seed,
                s.strategies,
                run.out.display()
            );
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&run)?;
            println!(
                "evaluated {} strategies x {} scenarios into {}",
                s.strategies,
                s.scenarios,
                run.out.display()
            );
        }
        Command::Fit { metric, strategy } => {
            let s = cmd_fit(&run, metric, strategy)?;
            println!("{}", s.report);
            println!("model written to {}", s.model_path.display());
            if s.warning {
                eprintln!(
                    "warning: cross-validated error {:.4} exceeds {CV_ERROR_WARNING}",
                    s.report.final_error
                );
            }
        }
        Command::Report => {
            let s = cmd_report(&run)?;
            let r = &s.report;
            let front: Vec<String> = r.front.iter().map(usize::to_string).collect();
            println!("strategies: {}", r.records.len());
            println!("pareto front: {}", front.join(" "));
            println!("near-max-rate exposure ratio: {:.4}", r.near_max_rate_ratio);
            for h in &s.histograms {
                println!("histogram written to {}", h.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
