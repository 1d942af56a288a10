use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use moldream::dream::{dream, step_records, to_jsonl, DreamConfig};
use moldream::molgraph::{parse_smiles, write_smiles};
use moldream::net::{read_model, train, write_model};
use moldream::pipeline::{
    build_oracle, ingest, probe_trajectories, run_experiment, write_outputs, ExperimentConfig, PipelineError, Split,
};

/// Inverse molecular design by dreaming through a frozen property network.
#[derive(Debug, Parser)]
#[command(name = "moldream", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a SMILES dataset and report what would be used.
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
        /// Experiment config supplying n_smallest, max_len and the oracle.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a property network on an ingested dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dream one molecule toward a target and print its trajectory.
    Dream {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        smiles: String,
        #[arg(long, allow_hyphen_values = true)]
        target: f64,
        #[arg(long, default_value_t = DreamConfig::default().noise_upper_bound)]
        noise_upper: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DreamConfig::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value_t = DreamConfig::default().max_epochs)]
        max_epochs: usize,
    },
    /// Run the full ingest, train, dream and report pipeline.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the config's split: all, train or validation.
        #[arg(long)]
        split: Option<Split>,
    },
    /// Print per-element composition shifts from a trajectory export.
    Probe {
        #[arg(long)]
        trajectories: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest { dataset, config } => {
            let cfg = load_config(config.as_deref())?;
            let oracle = build_oracle(&cfg)?;
            let d = ingest(&dataset, cfg.n_smallest, cfg.max_len, oracle.as_ref())?;
            let labels = d.labels();
            let stats = moldream::oracle::dataset_stats(&labels).map_err(data)?;
            println!("molecules\t{}", d.len());
            println!("skipped\t{}", d.skips.len());
            println!(
                "label mean {:.4} std {:.4} min {:.4} max {:.4}",
                stats.mean, stats.std, stats.min, stats.max
            );
            print!("{}", d.skips_text());
        }
        Command::Train { dataset, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let oracle = build_oracle(&cfg)?;
            let d = ingest(&dataset, cfg.n_smallest, cfg.max_len, oracle.as_ref())?;
            let (model, history) = train(&d.training_data(), &cfg.train).map_err(data)?;
            for e in &history.epochs {
                match e.validation_mse {
                    Some(v) => eprintln!("epoch {}\ttrain {:.6}\tvalidation {:.6}", e.epoch, e.train_mse, v),
                    None => eprintln!("epoch {}\ttrain {:.6}", e.epoch, e.train_mse),
                }
            }
            write_model(&model, &out).map_err(data)?;
            println!("wrote {} ({} parameters)", out.display(), model.mlp.parameter_count());
        }
        Command::Dream {
            model,
            smiles,
            target,
            noise_upper,
            seed,
            learning_rate,
            max_epochs,
        } => {
            let model = read_model(&model).map_err(data)?;
            let start = parse_smiles(&smiles).map_err(data)?;
            let cfg = DreamConfig {
                target,
                noise_upper_bound: noise_upper,
                seed,
                learning_rate,
                max_epochs,
                ..DreamConfig::default()
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let t = dream(&model, &start, &cfg).map_err(data)?;
            print!("{}", to_jsonl(&step_records(&t, 0, None)));
            eprintln!(
                "final {} predicted {:.4} after {} epochs ({:?})",
                write_smiles(&t.last().graph),
                t.final_predicted,
                t.epochs_run,
                t.termination
            );
        }
        Command::Experiment { config, out_dir, split } => {
            let mut cfg = load_config(Some(&config))?;
            if let Some(s) = split {
                cfg.split = s;
            }
            let outcome = run_experiment(&cfg)?;
            write_outputs(&outcome, &out_dir)?;
            let r = &outcome.report;
            println!("molecules\t{}", r.molecules);
            println!("original\tmean {:.4}\tstd {:.4}", r.original.mean, r.original.std);
            println!(
                "dreamed_high\tmean {:.4}\tmax {:.4}",
                r.high.stats.mean, r.high.stats.max
            );
            println!("dreamed_low\tmean {:.4}\tmin {:.4}", r.low.stats.mean, r.low.stats.min);
            println!("outputs in {}", out_dir.display());
        }
        Command::Probe { trajectories } => {
            let text = std::fs::read_to_string(&trajectories)
                .map_err(|e| Failure::Data(format!("cannot read {}: {e}", trajectories.display())))?;
            for shift in probe_trajectories(&text)? {
                print!("{}", shift.to_table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
