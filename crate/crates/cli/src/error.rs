use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("model error in {context}: {source}")]
    Model {
        context: String,
        #[source]
        source: patchdrift::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Model { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub(crate) trait ModelContext<T> {
    fn context(self, what: impl Into<String>) -> Result<T>;
}

impl<T> ModelContext<T> for patchdrift::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Model {
            context: what.into(),
            source,
        })
    }
}
