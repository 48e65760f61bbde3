use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported constellation size {0} (expected 2 or 4)")]
    UnsupportedConstellation(usize),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("pattern {0:?} is not in the index lookup table")]
    IllegalPattern(Vec<usize>),

    #[error("expected {expected} bits, got {actual}")]
    BitLength { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("configuration too large for exhaustive search: p = {0} > 24")]
    TooManyCandidates(usize),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Diverged { epoch: usize, batch: usize },

    #[error("bad magic bytes in {0}")]
    BadMagic(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("file truncated while reading {0}")]
    Truncated(String),

    #[error("tensor {name}: {detail}")]
    TensorHeader { name: String, detail: String },

    #[error("unknown detector '{0}' (expected ml, llr or trans)")]
    UnknownDetector(String),

    #[error("the trans detector needs a weights file (--weights)")]
    MissingWeights,

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
