//! Experiment runner: probes, training, and evaluation harnesses around
//! the core networks and environments, with CSV and SVG output.

pub mod eval;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod settings;

use std::io;

use e2gn2_core::envs::EnvError;
use e2gn2_core::nets::NetError;
use e2gn2_core::ppo::TrainError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Train(TrainError),
    Net(NetError),
    Env(EnvError),
    Io(String, io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "bad configuration: {}", msg),
            CliError::Train(e) => write!(f, "training failed: {}", e),
            CliError::Net(e) => write!(f, "network failure: {}", e),
            CliError::Env(e) => write!(f, "environment failure: {}", e),
            CliError::Io(path, e) => write!(f, "io failure on {}: {}", path, e),
        }
    }
}

impl std::error::Error for CliError {}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::Train(e)
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        CliError::Net(e)
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        CliError::Env(e)
    }
}

/// Result of one experiment: human-readable report lines plus the overall
/// pass/fail verdict that drives the process exit code.
#[derive(Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome { passed: true, lines: Vec::new() }
    }

    pub fn check(&mut self, label: &str, ok: bool, detail: String) {
        self.passed &= ok;
        self.lines.push(format!(
            "[{}] {}: {}",
            if ok { "pass" } else { "FAIL" },
            label,
            detail
        ));
    }

    pub fn note(&mut self, line: String) {
        self.lines.push(line);
    }
}
