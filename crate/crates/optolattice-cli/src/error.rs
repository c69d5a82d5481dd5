use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Lib(optolattice::Error),
    Config(String),
    Io(String),
    SelfCheck(usize),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Lib(e) => e.category(),
            CliError::Config(_) => "invalid-config",
            CliError::Io(_) => "io",
            CliError::SelfCheck(_) => "selfcheck-failed",
        }
    }

    /// 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if !e.is_validation() => 2,
            CliError::SelfCheck(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::SelfCheck(n) => write!(f, "{n} self-check(s) failed"),
        }
    }
}

impl From<optolattice::Error> for CliError {
    fn from(e: optolattice::Error) -> Self {
        CliError::Lib(e)
    }
}
