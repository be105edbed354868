use std::path::PathBuf;

use oscillab_core::cycle::CycleError;
use oscillab_core::estimate::{EstimateError, SurvivorCurve};
use oscillab_core::fokker_planck::FpError;
use oscillab_core::phase_map::PhaseError;
use oscillab_core::sde::SimError;
use oscillab_core::tracking::TrackError;
use oscillab_core::zoo::SpecError;
use thiserror::Error;

/// Errors of a CLI run, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("no surviving paths")]
    NoSurvivors { curve: SurvivorCurve },
    #[error("numerical blow-up at t = {time}")]
    Blowup { time: f64 },
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 0 ok, 1 IO, 2 configuration, 3 no survivors, 4 blow-up, 5 other numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Spec(_) => 2,
            CliError::NoSurvivors { .. } => 3,
            CliError::Blowup { .. } => 4,
            CliError::Numerical(_) => 5,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NumericalBlowup { time, .. } => CliError::Blowup { time },
            SimError::InvalidStart(_) | SimError::InvalidConfig(_) | SimError::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::NoSurvivors { curve } => CliError::NoSurvivors { curve },
            EstimateError::Sim(s) => s.into(),
            EstimateError::InvalidInput(s) => CliError::Config(s),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<PhaseError> for CliError {
    fn from(e: PhaseError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<CycleError> for CliError {
    fn from(e: CycleError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<FpError> for CliError {
    fn from(e: FpError) -> Self {
        match e {
            FpError::NotTwoDimensional | FpError::InvalidInput(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
