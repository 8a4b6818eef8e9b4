use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("config file line {line}, column {column}: {message}")]
    ConfigFile { line: usize, column: usize, message: String },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Core(#[from] robust_sparse::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    /// Process exit status: 2 for solver indeterminacy, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(robust_sparse::Error::Indeterminate { .. }) => 2,
            _ => 1,
        }
    }
}
