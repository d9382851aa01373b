use hopchain::analysis::AnalysisError;
use hopchain::catalog::CatalogError;
use hopchain::chain::RunError;
use hopchain::translate::TranslateError;
use thiserror::Error;

/// Process-level failure, one variant per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Integrity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Integrity(_) => 3,
        }
    }

    /// The more severe of two errors, by exit code.
    pub fn worst(self, other: CliError) -> CliError {
        if other.exit_code() > self.exit_code() {
            other
        } else {
            self
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Integrity { .. } | RunError::Json { .. } => {
                CliError::Integrity(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TranslateError> for CliError {
    fn from(e: TranslateError) -> Self {
        if e.is_integrity() {
            CliError::Integrity(e.to_string())
        } else {
            CliError::Backend(e.to_string())
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::MissingMeasurement { .. } => CliError::Integrity(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
