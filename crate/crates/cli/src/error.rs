use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: entroflow::Error,
    },

    #[error("{0} invariant(s) failed")]
    Invariants(usize),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn numerical(module: &'static str) -> impl FnOnce(entroflow::Error) -> CliError {
        move |source| match source {
            entroflow::Error::Config(msg) | entroflow::Error::InvalidModel(msg) => CliError::Config(format!("{module}: {msg}")),
            source => CliError::Numerical { module, source },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Invariants(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
