use thiserror::Error;

/// Process exit statuses. Checks that ran but failed exit with
/// [`EXIT_CHECK_FAILED`]; everything else maps through [`CliError::exit_code`].
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("artifact integrity: {0}")]
    Integrity(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Output(_) => 5,
            CliError::Integrity(_) => 6,
            CliError::Internal(_) => 7,
        }
    }
}

impl From<scorelaw::Error> for CliError {
    fn from(e: scorelaw::Error) -> Self {
        use scorelaw::Error as E;
        match e {
            E::Param(_) | E::Domain(_) | E::Resource(_) => CliError::Infeasible(e.to_string()),
            E::Usage(_) => CliError::Usage(e.to_string()),
            E::Fit(_) | E::Probe(_) | E::Consistency(_) => CliError::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
