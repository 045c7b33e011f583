use std::fmt;

/// Failure of a command: a machine-readable category and a message.
///
/// Printed as `error[category]: message`; the process exit code is fixed
/// per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

/// Exit codes by category. Code 2 is left to argument parsing errors.
pub const EXIT_CODES: [(&str, i32); 12] = [
    ("config", 3),
    ("parse", 4),
    ("unsupported", 5),
    ("range", 6),
    ("insufficient-data", 7),
    ("numerical", 8),
    ("data", 9),
    ("generation", 10),
    ("io", 11),
    ("hash-mismatch", 12),
    ("not-found", 13),
    ("internal", 70),
];

impl CliError {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new("not-found", message)
    }

    pub fn hash_mismatch(message: impl Into<String>) -> Self {
        Self::new("hash-mismatch", message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with where the error happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        EXIT_CODES
            .iter()
            .find(|(c, _)| *c == self.category)
            .map_or(1, |&(_, code)| code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<eegtopo::Error> for CliError {
    fn from(e: eegtopo::Error) -> Self {
        CliError::new(e.category(), e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| e.into().context(what))
    }
}
