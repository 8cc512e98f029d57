//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scene flow construction, optimization, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("flow field is empty")]
    EmptyFlow,
    #[error("size mismatch: {expected} expected, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("input dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("distance grid too large: {voxels} voxels exceeds cap {cap}")]
    GridTooLarge { voxels: u64, cap: u64 },
    #[error("loss became non-finite at iteration {iter}: {loss}")]
    NonFiniteLoss { iter: usize, loss: f64 },
    #[error("non-finite coordinate encountered")]
    NonFiniteValue,
    #[error("sample has {got} frames, method requires {required}")]
    FrameCountError { required: usize, got: usize },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("truncated file: expected {expected} bytes of payload, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("count mismatch: header says {header}, payload holds {payload}")]
    CountMismatch { header: usize, payload: usize },
    #[error("missing frame file: {0}")]
    MissingFrame(String),
    #[error("gt flow has {flow} vectors but frame has {frame} points")]
    FlowSizeMismatch { flow: usize, frame: usize },
    #[error("meta parse error: {0}")]
    MetaParse(String),
    #[error("config parse failed:\n{0}")]
    ConfigParse(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("sample id mismatch: {0}")]
    IdMismatch(String),
    #[error("empty metrics list")]
    EmptyList,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
