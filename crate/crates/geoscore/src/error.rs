use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot open {}: {source}", path.display())]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{file}: bad header: {message}")]
    Header { file: String, message: String },

    #[error("{file}:{line}: {source}")]
    Integrity {
        file: String,
        line: u64,
        source: geoscore_core::Error,
    },

    #[error("{file}: no strata")]
    NoStrata { file: String },

    #[error(transparent)]
    Core(#[from] geoscore_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),
}

pub type Result<T, E = InputError> = std::result::Result<T, E>;
