//! Idiomaticity scoring for multiword terms.
//!
//! A term such as "Gray Matter" is embedded twice: once as a whole and once
//! word by word. Its *self-explainability* score is the best cosine any
//! weighted mix of the word vectors can reach against the whole-term vector.
//! Terms the words explain poorly score low and are likely idiomatic.
//!
//! The crate is split the way the pipeline runs:
//!
//! - [`ingest`]: term lists, frequency filtering, the JSONL embedding store,
//!   annotation files
//! - [`embed_client`]: batched HTTP fetches into the store
//! - [`vectors`] and [`scorer`]: the scoring math
//! - [`stats`]: histograms, tail thresholds, ROC/AUC, Cohen's kappa
//! - [`report`]: the file-to-file commands behind the `idiolens` CLI
//!
//! With the default `parallel` feature, batch scoring runs on rayon.
//! [`Execution::Sequential`] is always available and is what the
//! `parallel`-less build falls back to.

pub mod embed_client;
pub mod ingest;
pub mod report;
pub mod scorer;
pub mod stats;
pub mod vectors;

pub use ingest::{AnnotatedTerm, EmbeddingStore, Label, TermRecord};
pub use scorer::{score_batch, self_explainability, AlphaWeights, ScoredTerm};
pub use vectors::{EmbeddingVector, SimilarityTriple};

/// How batch work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the rayon pool; same as `Sequential` without the `parallel`
    /// feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}
