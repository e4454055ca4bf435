use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] spinsqueeze::Error),
    #[error("all {0} points failed")]
    AllFailed(usize),
    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.into(), message: message.into() }
    }

    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            _ => 1,
        }
    }
}
