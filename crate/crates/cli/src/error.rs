use thiserror::Error;

/// Top-level failure classes, mapped onto process exit codes: usage errors
/// exit 2, everything else that fails exits 1 (clap's own usage errors also
/// exit 2, so the code space stays consistent).
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Run(_) => 1,
        }
    }
}

impl From<diffuse_core::Error> for AppError {
    fn from(e: diffuse_core::Error) -> Self {
        AppError::Run(e.to_string())
    }
}

impl From<crate::mapio::MapError> for AppError {
    fn from(e: crate::mapio::MapError) -> Self {
        AppError::Run(e.to_string())
    }
}
