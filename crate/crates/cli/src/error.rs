use brt_core::BrtError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration file or flag combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input files that are malformed or inconsistent with the configuration.
    #[error("data error: {0}")]
    Data(String),

    #[error("malformed {what} file: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// Failure reported by the core library.
    #[error(transparent)]
    Core(#[from] BrtError),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 for configuration errors, 3 for data errors
    /// (unreadable, malformed or mismatched files), 4 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Format { .. } | CliError::Io { .. } | CliError::Csv(_) => 3,
            CliError::Core(e) => match e {
                BrtError::InvalidGrid(_)
                | BrtError::NotUnit(_)
                | BrtError::Alignment(..)
                | BrtError::DegenerateAngle(_)
                | BrtError::BackScatter(_)
                | BrtError::TransmissionPair
                | BrtError::UnsupportedShape(_)
                | BrtError::OutOfBounds(_)
                | BrtError::InvalidParameter(_) => 2,
                BrtError::GridMismatch { .. }
                | BrtError::LengthMismatch { .. }
                | BrtError::NegativeImage { .. }
                | BrtError::ScatterOutOfRange { .. }
                | BrtError::NegativeInput { .. } => 3,
                BrtError::ZeroDenominator(_)
                | BrtError::ModelZeroWithData { .. }
                | BrtError::DegenerateOperator(_)
                | BrtError::RootSolveFailure(_)
                | BrtError::MonotonicityViolation { .. } => 4,
            },
        }
    }
}
