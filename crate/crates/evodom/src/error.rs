use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Anything not covered below, including a failed verification.
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const BLOW_UP: u8 = 3;
    pub const NO_CONVERGENCE: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] evodom_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use evodom_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Schema { .. } => exit::CONFIG,
            CliError::Io { .. } => exit::FAILURE,
            CliError::Core(e) => match e {
                E::Config(_) | E::DomainCollapse { .. } | E::BoundViolation { .. } => exit::CONFIG,
                E::BlowUp { .. } => exit::BLOW_UP,
                E::NoConvergence { .. } | E::MonotonicityFailure { .. } => exit::NO_CONVERGENCE,
                E::Evaluation { .. } | E::Internal(_) => exit::FAILURE,
            },
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
