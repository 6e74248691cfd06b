use threedpm_meta::MetaError;
use threedpm_nnet::NnetError;

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid configuration or arguments (exit 2).
    #[error("validation error: {0}")]
    Validation(String),
    /// Divergence, non-finite values or an ambiguous estimate (exit 3).
    #[error("numerical abort: {0}")]
    Numerical(String),
    /// Missing, unreadable or corrupted files (exit 4).
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<threedpm::Error> for CliError {
    fn from(e: threedpm::Error) -> Self {
        use threedpm::Error as E;
        match e {
            E::Domain(_) | E::Config(_) => CliError::Validation(e.to_string()),
            E::Ambiguous(_) => CliError::Numerical(e.to_string()),
            E::Format(_) | E::Io(_) | E::Json(_) | E::Csv(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<NnetError> for CliError {
    fn from(e: NnetError) -> Self {
        match e {
            NnetError::Shape(_) => CliError::Validation(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<MetaError> for CliError {
    fn from(e: MetaError) -> Self {
        match e {
            MetaError::Config(_) => CliError::Validation(e.to_string()),
            MetaError::NonFinite { .. } | MetaError::Diverged { .. } => CliError::Numerical(e.to_string()),
            MetaError::Net(n) => n.into(),
            MetaError::Data(d) => d.into(),
            MetaError::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
