use ssm_core::SsmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] SsmError),

    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// Process exit status; see docs/formats.md.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                SsmError::InvalidInput(_) | SsmError::Parse(_) | SsmError::Io(_) => 3,
                SsmError::NonResonance { .. } | SsmError::UnstableOrigin { .. } | SsmError::NotSemisimple { .. } => 4,
                SsmError::InternalResonance { .. }
                | SsmError::EnslavedResonance { .. }
                | SsmError::NearResonance { .. }
                | SsmError::SingularPolarChart
                | SsmError::InsufficientData(_)
                | SsmError::Stiffness { .. }
                | SsmError::Integration(_) => 5,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
