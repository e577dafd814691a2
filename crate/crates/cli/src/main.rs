use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use motioncred::ingest::{RawSynthConfig, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WINDOW_SECONDS};
use motioncred::{ActivityCode, SensorMask};

mod commands;
mod config;
mod layout;
mod plot;
mod report;

use config::{Overrides, RunConfig};

/// Threshold-gated motion-biometric verification: train, attack, calibrate,
/// evaluate and verify.
#[derive(Debug, Parser)]
#[command(name = "motioncred", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "MOTIONCRED_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "MOTIONCRED_SEED")]
    seed: Option<u64>,
    /// Sensor masks, comma separated: phone-accel, all-accel, all, ...
    #[arg(long, global = true, env = "MOTIONCRED_MASK", value_delimiter = ',')]
    mask: Vec<SensorMask>,
    /// Activity codes, comma separated (A-S).
    #[arg(long, global = true, env = "MOTIONCRED_ACTIVITY", value_delimiter = ',')]
    activity: Vec<ActivityCode>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, env = "MOTIONCRED_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Window and featurize raw WISDM logs into a feature file.
    Ingest {
        /// Raw files or directories searched recursively.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW_SECONDS)]
        window_seconds: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
        sample_rate: f64,
    },
    /// Write synthetic raw logs in the WISDM directory layout.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 12)]
        subjects: usize,
        #[arg(long, default_value_t = 18)]
        windows: usize,
    },
    /// Train identification and authentication models.
    Train,
    /// Attack every trained model on its held-out windows.
    Attack,
    /// Build the threshold table from benign and adversarial windows.
    Calibrate,
    /// Write the CSV report tables and SVG figures.
    Evaluate,
    /// Train, attack, calibrate and evaluate in sequence.
    Run,
    /// Verify one window against a claimed identity.
    Verify {
        /// Output directory of a training run.
        #[arg(long)]
        models: PathBuf,
        /// Defaults to the table under `--models`.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Feature file holding the window.
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long)]
        claimed: u32,
    },
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let path = self.config.as_deref().context("--config is required for this command")?;
        let overrides = Overrides {
            seed: self.seed,
            masks: self.mask.clone(),
            activities: self.activity.clone(),
            out: self.out.clone(),
        };
        RunConfig::load(path, &overrides)
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Ingest { inputs, output, window_seconds, sample_rate } => {
            commands::ingest(inputs, output, *window_seconds, *sample_rate)?
        }
        Command::Synth { dir, subjects, windows } => {
            let mut cfg = RawSynthConfig {
                n_subjects: *subjects,
                windows_per_activity: *windows,
                seed: cli.seed.unwrap_or(1),
                ..Default::default()
            };
            if !cli.activity.is_empty() {
                cfg.activities = cli.activity.clone();
            }
            commands::synth(dir, &cfg)?
        }
        Command::Train => commands::train(&cli.run_config()?)?,
        Command::Attack => commands::attack(&cli.run_config()?)?,
        Command::Calibrate => commands::calibrate(&cli.run_config()?)?,
        Command::Evaluate => commands::evaluate(&cli.run_config()?)?,
        Command::Run => {
            let cfg = cli.run_config()?;
            commands::train(&cfg)?;
            commands::attack(&cfg)?;
            commands::calibrate(&cfg)?;
            commands::evaluate(&cfg)?;
        }
        Command::Verify { models, thresholds, sample, row, claimed } => {
            let outcome = commands::verify(models, thresholds.as_deref(), sample, *row, *claimed)?;
            return Ok(outcome.exit_code() as u8);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
