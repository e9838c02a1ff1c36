use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid index {index} (vertex count {count})")]
    InvalidIndex { index: i64, count: usize },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("zero-extent mesh cannot be normalized")]
    ZeroExtent,
    #[error("fully occluded input: no triangle is visible from any candidate axis")]
    FullyOccluded,
    #[error("raster has no valid pixels")]
    NoValidPixels,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("unstabbable surface: {hits} crossings after {lines} lines")]
    Unstabbable { hits: usize, lines: usize },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("both occupancy sets are empty")]
    BothEmpty,
    #[error("bad file format: {0}")]
    Format(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
