use super::{labeled_scores, StatsError};
use crate::ingest::AnnotatedTerm;
use crate::scorer::ScoredTerm;

/// Smallest `k` with `k / n ≥ tail_fraction` (nearest rank), at least 1.
pub fn tail_rank(n: usize, tail_fraction: f64) -> usize {
    let nf = n as f64;
    let mut k = ((tail_fraction * nf).ceil() as usize).clamp(1, n);
    // `tail * n` can land a hair above an integer; walk back to the true rank.
    while k > 1 && (k - 1) as f64 / nf >= tail_fraction {
        k -= 1;
    }
    while k < n && (k as f64 / nf) < tail_fraction {
        k += 1;
    }
    k
}

/// Score `t` such that the share of scores `≤ t` is the smallest achievable
/// share at or above `tail_fraction`.
pub fn low_tail_threshold(scores: &[f64], tail_fraction: f64) -> Result<f64, StatsError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(StatsError::InvalidFraction(tail_fraction));
    }
    if scores.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[tail_rank(sorted.len(), tail_fraction) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// `None` when there are no idiomatic labels.
    pub recall: Option<f64>,
    /// `None` when nothing is selected.
    pub precision: Option<f64>,
    pub selected_count: usize,
    pub true_positives: usize,
    pub positives: usize,
}

impl OperatingPoint {
    pub fn from_pairs(threshold: f64, pairs: &[(f64, bool)]) -> Self {
        let positives = pairs.iter().filter(|p| p.1).count();
        let selected: Vec<_> = pairs.iter().filter(|p| p.0 <= threshold).collect();
        let true_positives = selected.iter().filter(|p| p.1).count();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            threshold,
            recall: ratio(true_positives, positives),
            precision: ratio(true_positives, selected.len()),
            selected_count: selected.len(),
            true_positives,
            positives,
        }
    }
}

/// Recall and precision of "idiomatic iff score ≤ threshold" on the labeled
/// terms.
pub fn recall_precision_at(
    threshold: f64,
    scored: &[ScoredTerm],
    labels: &[AnnotatedTerm],
) -> Result<OperatingPoint, StatsError> {
    let pairs = labeled_scores(scored, labels)?;
    Ok(OperatingPoint::from_pairs(threshold, &pairs))
}

/// Precision expected from selecting a `tail_fraction` share of the
/// population when it holds `prevalence` idiomatic terms of which `recall`
/// fall in that share. Capped at 1.
pub fn expected_precision(prevalence: f64, recall: f64, tail_fraction: f64) -> f64 {
    (prevalence * (recall / tail_fraction)).min(1.0)
}
