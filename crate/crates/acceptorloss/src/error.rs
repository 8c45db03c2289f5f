use std::path::PathBuf;

use acceptorloss_core::acceptor::AcceptorError;
use acceptorloss_core::lindblad::LindbladError;
use acceptorloss_core::resonator::ResonatorError;
use acceptorloss_core::spectrum::SpectrumError;
use thiserror::Error;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: frequency does not increase at line {line}")]
    NonMonotonicFrequency { path: PathBuf, line: u64 },
    #[error("{path}: row {row}: negative weight {weight}")]
    NegativeWeight {
        path: PathBuf,
        row: usize,
        weight: f64,
    },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Numerical(_) => "numerical",
            _ => "validation",
        }
    }
}

impl From<AcceptorError> for CliError {
    fn from(e: AcceptorError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LindbladError> for CliError {
    fn from(e: LindbladError) -> Self {
        match e {
            LindbladError::DegenerateSteadyState { .. }
            | LindbladError::NoSteadyState { .. }
            | LindbladError::StepFailure { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::DegenerateFit(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ResonatorError> for CliError {
    fn from(e: ResonatorError) -> Self {
        match e {
            ResonatorError::Lindblad(inner) => inner.into(),
            ResonatorError::FitDiverged(_)
            | ResonatorError::DegenerateFit(_)
            | ResonatorError::BetaOutOfBounds(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
