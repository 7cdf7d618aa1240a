use hairforge_core::assets::AssetError;
use hairforge_core::growth::GrowthError;
use hairforge_core::imaging::ImagingError;
use hairforge_core::retrieval::RetrievalError;
use hairforge_core::SimError;
use thiserror::Error;

/// Process exit codes: 0 success, 1 usage error, 2 runtime error,
/// 3 validation failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<AssetError> for CliError {
    fn from(e: AssetError) -> Self {
        match e {
            AssetError::Io { .. } | AssetError::Thumbnail(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GrowthError> for CliError {
    fn from(e: GrowthError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::ProviderUnavailable(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NumericalBlowup { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}
