use std::fmt;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

impl CliError {
    pub fn config(field: impl fmt::Display, reason: impl fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: format!("invalid configuration field `{field}`: {reason}") }
    }

    pub fn parse(message: String) -> Self {
        Self { code: EXIT_CONFIG, message }
    }

    pub fn io(context: String, err: impl fmt::Display) -> Self {
        Self { code: EXIT_IO, message: format!("{context}: {err}") }
    }

    /// Prefixes the field path of a configuration error.
    pub fn within(self, section: &str) -> Self {
        let prefix = "invalid configuration field `";
        match self.message.strip_prefix(prefix) {
            Some(rest) if self.code == EXIT_CONFIG => {
                Self { code: self.code, message: format!("{prefix}{section}.{rest}") }
            }
            _ => self,
        }
    }
}

impl From<rdsdim::Error> for CliError {
    fn from(e: rdsdim::Error) -> Self {
        use rdsdim::Error::*;
        let code = match &e {
            InvalidParameter { .. } | Config { .. } => EXIT_CONFIG,
            BlowUp { .. } | NonConvergence(_) | DefectiveRoot { .. } => EXIT_NUMERICAL,
            InternalConsistency(_) | CoverageAudit(_) => EXIT_INTERNAL,
            Io(_) | Json(_) => EXIT_IO,
        };
        Self { code, message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
