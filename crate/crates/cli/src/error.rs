use offdiag_core::Error as CoreError;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration, grid or output location: exit code 1.
    Config,
    /// A computed quantity broke an invariant that must hold: exit code 2.
    Internal,
}

/// Every error names the configuration file and, where it applies, the
/// field inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct RunError {
    pub kind: ErrorKind,
    pub path: String,
    pub field: String,
    pub msg: String,
}

impl RunError {
    pub fn config(path: &str, field: &str, msg: impl Into<String>) -> Self {
        RunError { kind: ErrorKind::Config, path: path.into(), field: field.into(), msg: msg.into() }
    }

    pub fn internal(path: &str, field: &str, msg: impl Into<String>) -> Self {
        RunError { kind: ErrorKind::Internal, path: path.into(), field: field.into(), msg: msg.into() }
    }

    /// Sorts a core error: broken invariants are internal, everything else
    /// traces back to what the configuration asked for.
    pub fn from_core(e: CoreError, field: &str) -> Self {
        match e {
            CoreError::Invariant(_) | CoreError::NotHermitian => RunError::internal("", field, e.to_string()),
            _ => RunError::config("", field, e.to_string()),
        }
    }

    pub fn with_path(mut self, path: &str) -> Self {
        if self.path.is_empty() {
            self.path = path.into();
        }
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 1,
            ErrorKind::Internal => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "<config>" } else { &self.path };
        match (self.kind, self.field.is_empty()) {
            (ErrorKind::Config, true) => write!(f, "{path}: {}", self.msg),
            (ErrorKind::Config, false) => write!(f, "{path}: {}: {}", self.field, self.msg),
            (ErrorKind::Internal, true) => write!(f, "{path}: internal invariant violated: {}", self.msg),
            (ErrorKind::Internal, false) => write!(f, "{path}: {}: internal invariant violated: {}", self.field, self.msg),
        }
    }
}

impl std::error::Error for RunError {}
