use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("bad magic in {}: expected {expected:?}, found {found:?}", path.display())]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("truncated binary file {}: {message}", path.display())]
    Truncated { path: PathBuf, message: String },

    #[error("row-count mismatch: manifest has {manifest} rows, embedding file declares {embeddings}")]
    RowCountMismatch { manifest: usize, embeddings: usize },

    #[error("dimension mismatch{}: expected {expected}, found {found}", clip_suffix(.clip_id))]
    DimensionMismatch {
        expected: usize,
        found: usize,
        clip_id: Option<String>,
    },

    #[error("duplicate clip_id {clip_id:?} at manifest line {line}")]
    DuplicateClipId { clip_id: String, line: usize },

    #[error("non-finite embedding value for clip {clip_id:?} (manifest line {line})")]
    NonFiniteEmbedding { clip_id: String, line: usize },

    #[error(
        "MOS out of range for clip {clip_id:?} (manifest line {line}), model {model_id:?}: {value} not in [1, 5]"
    )]
    MosOutOfRange {
        clip_id: String,
        line: usize,
        model_id: String,
        value: f64,
    },

    #[error("unknown model {model_id:?} for clip {clip_id:?}")]
    UnknownModel { clip_id: String, model_id: String },

    #[error("missing score cell: clip {clip_id:?}, model {model_id:?}")]
    MissingScore { clip_id: String, model_id: String },

    #[error("unknown clip {0:?}")]
    UnknownClip(String),

    #[error("degenerate centroids: clusters {0} and {1} coincide")]
    DegenerateCentroids(usize, usize),

    #[error("constant input: correlation is undefined")]
    ConstantInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn clip_suffix(clip_id: &Option<String>) -> String {
    match clip_id {
        Some(id) => format!(" for clip {id:?}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure came from the environment rather than from the
    /// caller's data or arguments.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound)
    }
}
