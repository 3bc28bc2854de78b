use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Index construction over zero chunks.
    EmptyCorpus,
    /// Zero-norm vector given to cosine similarity.
    DegenerateVector,
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    DuplicateId(String),
    UnknownChunk(String),
    EmptyCandidates,
    InvalidParams(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCorpus => f.write_str("empty corpus"),
            Error::DegenerateVector => f.write_str("degenerate vector"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::DuplicateId(id) => write!(f, "duplicate id: {id}"),
            Error::UnknownChunk(id) => write!(f, "unknown chunk: {id}"),
            Error::EmptyCandidates => f.write_str("empty candidate list"),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
