use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manip_learn_cli::{
    cmd_evaluate, cmd_gridsearch, cmd_heatmap, cmd_train, EvaluateArgs, GridSearchArgs, HeatmapArgs, TrainArgs,
};

#[derive(Parser)]
#[command(name = "manip-learn", version, about = "Train, evaluate and inspect simulated manipulation learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file
    #[arg(long)]
    scenario: PathBuf,
    /// Master seed for every random stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (must not exist)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize and practice until every pose has converged
    Train {
        #[command(flatten)]
        common: Common,
        /// Stop after initialization
        #[arg(long)]
        init_only: bool,
    },
    /// Run trials of both behaviors with retry
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        max_attempts: usize,
        /// Approach from the nominal pose without navigation noise
        #[arg(long)]
        noise_free: bool,
    },
    /// Render where a behavior is predicted to succeed
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Behavior name (e.g. drawer-open) or forward/reverse
        #[arg(long)]
        behavior: String,
        #[arg(long, default_value_t = 4)]
        step: u32,
    },
    /// Select SVM hyperparameters on registered views
    Gridsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "forward")]
        behavior: String,
        #[arg(long, default_value_t = 10)]
        views: usize,
        /// Comma-separated gamma values
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// Comma-separated cost multipliers
        #[arg(long, value_delimiter = ',')]
        c_scales: Option<Vec<f64>>,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train { common, init_only } => {
            let outcome = cmd_train(&TrainArgs { scenario: common.scenario, seed: common.seed, out: common.out, init_only })?;
            for row in &outcome.labels {
                println!("{:<14} positive={:>3} negative={:>3} total={:>3}", row.action, row.positive, row.negative, row.total());
            }
            println!("wrote {}", outcome.out.display());
            match &outcome.report {
                None => {
                    eprintln!("initialization failed, see {}", outcome.out.join("error.txt").display());
                    Ok(ExitCode::from(3))
                }
                Some(r) if !r.converged && !init_only => {
                    eprintln!("training did not converge after {} visits", r.visits);
                    Ok(ExitCode::from(2))
                }
                Some(_) => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Evaluate { common, checkpoint, trials, max_attempts, noise_free } => {
            let outcome = cmd_evaluate(&EvaluateArgs {
                scenario: common.scenario,
                seed: common.seed,
                out: common.out,
                checkpoint,
                trials,
                max_attempts,
                noise_free,
            })?;
            for (name, t) in &outcome.rows {
                println!(
                    "{name:<14} first={} second={} later={} failed={}",
                    t.first_try, t.second_try, t.later, t.failed
                );
            }
            println!("wrote {}", outcome.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Heatmap { common, checkpoint, behavior, step } => {
            let outcome = cmd_heatmap(&HeatmapArgs {
                scenario: common.scenario,
                seed: common.seed,
                out: common.out,
                checkpoint,
                behavior,
                step,
            })?;
            println!(
                "green pixels {} ({:.1}% inside the success region)",
                outcome.overlap.green_pixels,
                100.0 * outcome.overlap.fraction()
            );
            println!("wrote {}", outcome.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gridsearch { common, behavior, views, gammas, c_scales } => {
            let outcome = cmd_gridsearch(&GridSearchArgs {
                scenario: common.scenario,
                seed: common.seed,
                out: common.out,
                behavior,
                views,
                gammas,
                c_scales,
            })?;
            let b = outcome.result.best_score;
            println!("gamma={} c_scale={} balanced_accuracy={:.4}", b.gamma, b.c_scale, b.balanced_accuracy);
            println!("wrote {}", outcome.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
