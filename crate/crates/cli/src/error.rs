use std::fmt;
use std::process::ExitCode;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Other,
    Config,
    Data,
    Budget,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            ExitKind::Other => 1,
            ExitKind::Config => 3,
            ExitKind::Data => 4,
            ExitKind::Budget => 5,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitKind::Config, error)
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitKind::Data, error)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.code())
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<ris_core::Error> for CliError {
    fn from(e: ris_core::Error) -> Self {
        use ris_core::Error as E;
        let kind = match &e {
            E::InvalidConfig { .. } => ExitKind::Config,
            E::BudgetExceeded { .. } => ExitKind::Budget,
            E::VersionMismatch { .. }
            | E::Truncated { .. }
            | E::Checksum { .. }
            | E::Corrupt { .. }
            | E::IndexOutOfRange { .. } => ExitKind::Data,
            _ => ExitKind::Other,
        };
        Self::new(kind, e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ExitKind::Other, e)
    }
}
