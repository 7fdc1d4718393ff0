use std::fmt;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// A self-check did not meet its threshold (exit 1).
    Check(String),
    /// Bad key, value or argument (exit 2).
    Config(String),
    /// Training produced a non-finite value (exit 3).
    Diverged(String),
    /// Reading or writing a file failed (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Diverged(m) => f.write_str(m),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cortical::Error> for CliError {
    fn from(e: cortical::Error) -> Self {
        use cortical::Error as E;
        match e {
            E::Io { .. } => CliError::Io(e.to_string()),
            E::Diverged { .. } | E::NonFinite(_) | E::Backward(_) => CliError::Diverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let codes: Vec<u8> = [
            CliError::Check(String::new()),
            CliError::Config(String::new()),
            CliError::Diverged(String::new()),
            CliError::Io(String::new()),
        ]
        .iter()
        .map(CliError::exit_code)
        .collect();
        assert_eq!(codes, [1, 2, 3, 4]);
    }

    #[test]
    fn core_errors_map_to_classes() {
        let io = cortical::Error::Io {
            path: "x".into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
        };
        assert_eq!(CliError::from(io).exit_code(), 4);
        let div = cortical::Error::Diverged { step: 3, reason: "nan".into() };
        assert_eq!(CliError::from(div).exit_code(), 3);
        assert_eq!(CliError::from(cortical::Error::Config("k".into())).exit_code(), 2);
    }
}
