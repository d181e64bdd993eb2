use clap::{Parser, Subcommand};
use snsgan_cli::commands;
use snsgan_cli::config::{load_benchmark, load_experiment};
use snsgan_cli::exit_code;
use snsgan_core::error::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "snsgan",
    version,
    about = "Class-conditional GAN training through structured noise spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, loss curve, and metric reports
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory in the config file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate class-conditional samples from a checkpoint
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Class index to condition on
        #[arg(long = "class")]
        class: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file: .csv for series models, .pgm for image models
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint with the classifier-based metric suite
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a variant x dataset x seed grid and write the comparison table
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render per-class overlays of real and generated series as SVG
    Plot {
        /// UCR-format dataset files and/or generated-sample CSVs
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Cap on drawn series per panel per input
        #[arg(long, default_value_t = 10)]
        max_series: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_experiment(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
                cfg.train.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let artifacts = commands::cmd_train(&cfg)?;
            for path in artifacts {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Generate { config, checkpoint, class, count, seed, out } => {
            let cfg = load_experiment(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            commands::cmd_generate(&cfg, &checkpoint, class, count, seed, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Evaluate { config, checkpoint, seed, out } => {
            let cfg = load_experiment(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let report = commands::cmd_evaluate(&cfg, &checkpoint, seed, &out)?;
            println!(
                "score {:.4}  frechet {:.4}  conditional_accuracy {:.4}  classifier_test_accuracy {:.4}",
                report.score,
                report.frechet_distance,
                report.conditional_accuracy,
                report.classifier_test_accuracy
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Benchmark { config, out } => {
            let cfg = load_benchmark(&config)?;
            let rows = commands::cmd_benchmark(&cfg, &out)?;
            for row in &rows {
                match &row.report {
                    Some(r) => println!(
                        "{:<12} {:<20} seed {:<3} score {:.4} frechet {:.4}",
                        row.model, row.dataset, row.seed, r.score, r.frechet_distance
                    ),
                    None => println!(
                        "{:<12} {:<20} seed {:<3} {}",
                        row.model, row.dataset, row.seed, row.status
                    ),
                }
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Plot { inputs, out, max_series } => {
            commands::cmd_plot(&inputs, &out, max_series)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reserves exit code 2 for usage errors; this tool maps
            // usage problems to 1 (2 means a data/format failure)
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
