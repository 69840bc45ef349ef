//! Term lists, word-frequency filtering, the embedding store, and
//! annotation files.

mod annotations;
mod store;
mod terms;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use annotations::{annotators, by_annotator, parse_annotations, AnnotatedTerm, Label};
pub use store::{EmbeddingStore, STORE_FORMAT, STORE_VERSION};
pub use terms::{
    build_vocab, dedup_terms, filter_two_word_terms, normalize_text, parse_terms, TermRecord,
    VocabFrequency, DEFAULT_MAX_FREQ, DEFAULT_MIN_FREQ,
};

use crate::vectors::VectorError;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid UTF-8 on line {0}")]
    InvalidEncoding(usize),
    #[error("malformed record on line {0}")]
    MalformedRecord(usize),
    #[error("vector length differs from header dim on line {0}")]
    DimInconsistent(usize),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("unsupported store header: {0}")]
    UnsupportedHeader(String),
    #[error("vector dimension {found} does not match store dimension {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("store has no vectors, dimension unknown")]
    UnknownDim,
    #[error(transparent)]
    InvalidVector(#[from] VectorError),
    #[error("unknown label {label:?} on line {line}")]
    UnknownLabel { line: usize, label: String },
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", path.display())]
    Path {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Path {
            path: path.to_path_buf(),
            source,
        }
    }
}
