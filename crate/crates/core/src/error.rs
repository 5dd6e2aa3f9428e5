use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShcError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("k = {k} is out of range 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("node {0} is a leaf, not an internal node")]
    NotInternal(usize),
    #[error("node {0} does not exist in this dendrogram")]
    UnknownNode(usize),
    #[error("cluster index kinds differ")]
    KindMismatch,
    #[error("node has {n_j} observations, below the minimum of {n_min}")]
    NodeTooSmall { n_j: usize, n_min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("sample {0} has no nonzero entries")]
    DegenerateSample(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ShcError> = std::result::Result<T, E>;

impl ShcError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        ShcError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by configuration or I/O.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            ShcError::InvalidData(_)
                | ShcError::DegenerateData(_)
                | ShcError::DegenerateSample(_)
                | ShcError::TooFewObservations { .. }
                | ShcError::Parse { .. }
                | ShcError::Io { .. }
        )
    }
}
