use super::{labeled_scores, StatsError};
use crate::ingest::AnnotatedTerm;
use crate::scorer::ScoredTerm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Terms scoring at or below this value are predicted idiomatic. The
    /// origin point carries `-inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub fn roc(scored: &[ScoredTerm], labels: &[AnnotatedTerm]) -> Result<RocCurve, StatsError> {
    roc_from_pairs(&labeled_scores(scored, labels)?)
}

/// ROC of the low-score classifier over `(score, is_idiomatic)` pairs.
///
/// Thresholds sweep every distinct score in ascending order; equal scores
/// move together as one step, and the area is integrated with trapezoids.
pub fn roc_from_pairs(pairs: &[(f64, bool)]) -> Result<RocCurve, StatsError> {
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(StatsError::DegenerateLabels);
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::NEG_INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    for group in sorted.chunk_by(|a, b| a.0 == b.0) {
        for &(_, idio) in group {
            if idio {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let prev = *points.last().expect("origin pushed");
        let next = RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
            threshold: group[0].0,
        };
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        points.push(next);
    }
    Ok(RocCurve { points, auc })
}
