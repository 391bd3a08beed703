//! Batch driver behind the `sepsim` binary: strict TOML experiment files,
//! validation, the six pipelines and their report files.

mod config;
mod output;
mod run;
mod validate;

use std::fmt;

pub use config::{
    DualityCase, DualityConfig, ExperimentConfig, HydroSection, MsdConfig, NagyConfig, SepConfig, SolverConfig,
};
pub use output::{Manifest, MANIFEST_FILE};
pub use run::{run, RunSummary};
pub use validate::validate;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SEPSIM_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    GenEnv,
    EstimateD,
    SimulateSep,
    DualityTest,
    NagyTest,
    Hydro,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenEnv => "gen-env",
            Command::EstimateD => "estimate-d",
            Command::SimulateSep => "simulate-sep",
            Command::DualityTest => "duality-test",
            Command::NagyTest => "nagy-test",
            Command::Hydro => "hydro",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config: {0}")]
    Config(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Sep(#[from] sepsim::SepError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 3 for numerical failures, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sep(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

/// Parses a config file body. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}
