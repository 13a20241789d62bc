use std::fmt;

/// Failure of one CLI run, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or referenced inputs. Exit code 2.
    Config(String),
    /// A computation failed on valid input. Exit code 1.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }

    /// Wraps a library error with the stage that produced it.
    pub fn context(stage: &str, err: dnn_noise::Error) -> Self {
        use dnn_noise::Error as E;
        let msg = format!("{stage}: {err}");
        match err {
            E::InvalidNetwork(_)
            | E::Shape(_)
            | E::InvalidArgument(_)
            | E::UnsupportedOrder { .. }
            | E::NotSymmetric(_)
            | E::Idx(_)
            | E::Json(_) => CliError::Config(msg),
            E::Io(_) | E::Csv(_) => CliError::Config(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Shorthand for `map_err(|e| CliError::context(stage, e))`.
pub trait Context<T> {
    fn ctx(self, stage: &str) -> CliResult<T>;
}

impl<T> Context<T> for dnn_noise::Result<T> {
    fn ctx(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::context(stage, e))
    }
}

/// Output file could not be written.
pub fn io_err(path: &std::path::Path, err: impl fmt::Display) -> CliError {
    CliError::Config(format!("cannot write {}: {err}", path.display()))
}
