//! Crate-wide error type.

/// Errors surfaced by carrier generation, codecs, settings, orchestration,
/// wardens and file I/O. `Config` covers schema/settings mismatches,
/// `Capacity` a carrier that cannot hold the requested bits, `Parse` any
/// malformed input file.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration: bad settings, schema mismatch, unusable
    /// parameter combination.
    Config(String),
    /// The carrier cannot hold at least one bit under the given settings,
    /// or a combination slot ran out of room.
    Capacity(String),
    /// Malformed input file. `at` is a byte offset for binary inputs and a
    /// line number for text inputs.
    Parse {
        what: String,
        at: u64,
    },
    /// Two combined specs write to the same place.
    Conflict(String),
    /// A variation target entry is missing; lists the required key set.
    MissingEntry {
        pattern: String,
        protocol: String,
        required: Vec<&'static str>,
    },
    Io(std::io::Error),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Capacity(m) => write!(f, "capacity error: {m}"),
            Error::Parse { what, at } => write!(f, "parse error at {at}: {what}"),
            Error::Conflict(m) => write!(f, "conflict: {m}"),
            Error::MissingEntry {
                pattern,
                protocol,
                required,
            } => write!(
                f,
                "variation error: no settings entry for ({pattern}, {protocol}); required keys: {}",
                required.join(", ")
            ),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn parse(what: impl Into<String>, at: u64) -> Self {
        Error::Parse {
            what: what.into(),
            at,
        }
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingEntry { .. } | Error::Parse { .. } => 2,
            Error::Capacity(_) | Error::Conflict(_) | Error::Io(_) => 3,
        }
    }
}
