use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use e2gn2_cli::experiments;
use e2gn2_cli::settings::Settings;
use e2gn2_cli::{CliError, Outcome};

/// Experiment runner for equivariant multi-agent RL.
#[derive(Parser)]
#[command(name = "e2gn2", version, about)]
struct Cli {
    /// Flat key = value config file with one section per experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Network kind (overrides the config file).
    #[arg(long, global = true, value_parser = ["mlp", "gnn", "egnn", "e2gn2"])]
    network: Option<String>,

    /// Environment (overrides the config file).
    #[arg(long, global = true, value_parser = ["spread", "tag", "skirmish"])]
    env: Option<String>,

    /// Total environment steps for training runs.
    #[arg(long, global = true)]
    steps: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo probe of the mean action at initialization.
    BiasProbe,
    /// Rotation/reflection/translation equivariance checks.
    EquivProbe,
    /// Train one network on one environment.
    Train,
    /// Train on left-initialized skirmish, evaluate left/right/all.
    Generalize,
    /// Evaluate a 5-agent policy at other agent counts.
    Scale,
    /// Train several network kinds over a seed list and compare curves.
    Compare,
}

impl Command {
    fn section(&self) -> &'static str {
        match self {
            Command::BiasProbe => "bias-probe",
            Command::EquivProbe => "equiv-probe",
            Command::Train => "train",
            Command::Generalize => "generalize",
            Command::Scale => "scale",
            Command::Compare => "compare",
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let section = cli.command.section();
    if let Some(seed) = cli.seed {
        settings.set(section, "seed", seed);
        settings.set(section, "seeds", seed);
    }
    if let Some(network) = &cli.network {
        settings.set(section, "network", network);
    }
    if let Some(env) = &cli.env {
        settings.set(section, "env", env);
    }
    if let Some(steps) = cli.steps {
        settings.set(section, "steps", steps);
    }

    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(cli.out.display().to_string(), e))?;
    fs::write(cli.out.join("effective.cfg"), settings.echo())
        .map_err(|e| CliError::Io(cli.out.display().to_string(), e))?;

    match cli.command {
        Command::BiasProbe => experiments::run_bias_probe(&settings, &cli.out),
        Command::EquivProbe => experiments::run_equiv_probe(&settings, &cli.out),
        Command::Train => experiments::run_train(&settings, &cli.out),
        Command::Generalize => experiments::run_generalize(&settings, &cli.out),
        Command::Scale => experiments::run_scale(&settings, &cli.out),
        Command::Compare => experiments::run_compare(&settings, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{}", line);
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
