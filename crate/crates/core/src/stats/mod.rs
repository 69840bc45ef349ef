//! Score distributions, operating points, ROC analysis and annotator
//! agreement.

mod histogram;
mod kappa;
mod roc;
mod threshold;

use std::collections::HashMap;

use thiserror::Error;

pub use histogram::{
    bin_ratios, estimate_idiomatic_distribution, histogram, BinRatioEstimate, Histogram,
    IdiomaticEstimate,
};
pub use kappa::{cohen_kappa, Agreement};
pub use roc::{roc, roc_from_pairs, RocCurve, RocPoint};
pub use threshold::{
    expected_precision, low_tail_threshold, recall_precision_at, tail_rank, OperatingPoint,
};

use crate::ingest::AnnotatedTerm;
use crate::scorer::ScoredTerm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("bin ratios do not align with histogram bins")]
    BinMismatch,
    #[error("tail fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("no score for labeled term {0:?}")]
    MissingScore(String),
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("annotators labeled different term sets")]
    TermSetMismatch,
    #[error("term {0:?} labeled twice by the same annotator")]
    DuplicateTerm(String),
    #[error("kappa undefined: chance agreement is 1")]
    KappaUndefined,
}

/// Pairs each labeled term with its score; `true` marks idiomatic.
pub fn labeled_scores(
    scored: &[ScoredTerm],
    labels: &[AnnotatedTerm],
) -> Result<Vec<(f64, bool)>, StatsError> {
    labeled_pairs(scored.iter().map(|s| (s.term.as_str(), s.score)), labels)
}

/// Like [`labeled_scores`], from bare `(term, score)` pairs. The first score
/// seen for a term wins.
pub fn labeled_pairs<'a>(
    scores: impl IntoIterator<Item = (&'a str, f64)>,
    labels: &[AnnotatedTerm],
) -> Result<Vec<(f64, bool)>, StatsError> {
    let mut by_term: HashMap<&str, f64> = HashMap::new();
    for (term, score) in scores {
        by_term.entry(term).or_insert(score);
    }
    labels
        .iter()
        .map(|l| {
            by_term
                .get(l.term.as_str())
                .map(|&s| (s, l.label.is_idiomatic()))
                .ok_or_else(|| StatsError::MissingScore(l.term.clone()))
        })
        .collect()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}
