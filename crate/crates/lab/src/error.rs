use thiserror::Error;

pub type LabResult<T> = Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] specclust_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}

impl LabError {
    /// 2 for configuration problems, 3 for solver failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use specclust_core::Error as E;
        match self {
            LabError::Config(_) => 2,
            LabError::Core(E::Configuration(_) | E::KernelCondition(_)) => 2,
            LabError::Core(E::Solver { .. }) => 3,
            _ => 1,
        }
    }
}
