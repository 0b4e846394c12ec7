use std::fmt;

use topicscope::dynamics::DynamicsError;
use topicscope::embedstore::EmbedError;
use topicscope::ingest::IngestError;
use topicscope::persistence::PersistError;
use topicscope::Error;

/// Process exit status. The numeric values are a stable contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Domain = 3,
    Io = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Usage, message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Domain, message: message.into() }
    }

    pub fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        Self { kind: ExitKind::Io, message: format!("{}: {e}", path.display()) }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn kind_of(e: &Error) -> ExitKind {
    match e {
        Error::Config(_) => ExitKind::Usage,
        Error::Io { .. }
        | Error::Ingest(IngestError::Io(_))
        | Error::Embed(EmbedError::Io(_))
        | Error::Persist(PersistError::Io { .. })
        | Error::Dynamics(DynamicsError::Io { .. }) => ExitKind::Io,
        Error::Persist(PersistError::Exists(_)) => ExitKind::Usage,
        _ => ExitKind::Domain,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { kind: kind_of(&e), message: e.to_string() }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

via_core!(IngestError, EmbedError, PersistError, DynamicsError, topicscope::stats::StatsError, topicscope::tune::TuneError);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).code(), 2);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::from(Error::io(std::path::Path::new("a"), io)).code(), 4);
        assert_eq!(CliError::from(topicscope::stats::StatsError::Degenerate).code(), 3);
        assert_eq!(CliError::from(PersistError::Exists("m".into())).code(), 2);
        assert_eq!(CliError::from(PersistError::Truncated("labels".into())).code(), 3);
    }
}
