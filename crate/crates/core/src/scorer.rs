//! Self-explainability scoring.
//!
//! A term embedding `rΣ` is compared with the best weighted combination of
//! its constituent embeddings `r₁ … rₙ`. Maximizing the cosine over
//! unconstrained weights lands on the orthogonal projection of `r̄Σ` onto
//! `span{r̄ᵢ}`, so the score is the cosine between `r̄Σ` and that projection,
//! always in `[0, 1]`.
//!
//! Two constituents use the closed form
//!
//! ```text
//! α₁ = r1Σ − r12·r2Σ
//! α₂ = r2Σ − r12·r1Σ
//! ```
//!
//! which is the Gram-system solution scaled by `1 − r12²`. Longer terms solve
//! `G α = b` with `Gᵢⱼ = r̄ᵢ·r̄ⱼ` and `bᵢ = r̄ᵢ·r̄Σ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::ingest::{EmbeddingStore, TermRecord};
use crate::vectors::{self, EmbeddingVector, SimilarityTriple, VectorError};
use crate::Execution;

/// Constituents with `|r12| ≥ 1 − COLLINEAR_TOLERANCE` span a single line.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// Gram eigenvalues at or below this fraction of the largest one are dropped.
pub const GRAM_RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("constituents are collinear (|r12| = {0})")]
    CollinearConstituents(f64),
    #[error("need at least 2 constituents, got {0}")]
    TooFewConstituents(usize),
}

/// Mixing coefficients, one per constituent.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaWeights(pub Vec<f64>);

impl AlphaWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_negative(&self) -> bool {
        self.0.iter().any(|&a| a < 0.0)
    }
}

/// Closed-form optimal weights for a two-word term.
pub fn optimal_alpha_pair(t: &SimilarityTriple) -> Result<AlphaWeights, ScoreError> {
    if t.r12.abs() >= 1.0 - COLLINEAR_TOLERANCE {
        return Err(ScoreError::CollinearConstituents(t.r12.abs()));
    }
    Ok(AlphaWeights(vec![
        t.r1s - t.r12 * t.r2s,
        t.r2s - t.r12 * t.r1s,
    ]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramSolution {
    pub weights: AlphaWeights,
    /// Set when the Gram matrix was rank-deficient and the minimum-norm
    /// solution was returned instead.
    pub rank_deficient: bool,
}

/// Projection weights for any number of constituents.
pub fn optimal_alpha_general(
    constituents: &[EmbeddingVector],
    rs: &EmbeddingVector,
) -> Result<GramSolution, ScoreError> {
    if constituents.len() < 2 {
        return Err(ScoreError::TooFewConstituents(constituents.len()));
    }
    let units = constituents
        .iter()
        .map(vectors::normalize)
        .collect::<Result<Vec<_>, _>>()?;
    let target = vectors::normalize(rs)?;
    let n = units.len();

    let mut gram = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        rhs[i] = vectors::dot(&units[i], &target)?;
        for j in (i + 1)..n {
            let g = vectors::dot(&units[i], &units[j])?;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }

    let eigen = SymmetricEigen::new(gram);
    let largest = eigen.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = GRAM_RANK_TOLERANCE * largest;
    let mut weights = DVector::<f64>::zeros(n);
    let mut rank_deficient = false;
    for (k, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda <= cutoff {
            rank_deficient = true;
            continue;
        }
        let u = eigen.eigenvectors.column(k);
        let coeff = u.dot(&rhs) / lambda;
        weights.axpy(coeff, &u, 1.0);
    }

    Ok(GramSolution {
        weights: AlphaWeights(weights.iter().copied().collect()),
        rank_deficient,
    })
}

/// Score plus the weights that achieve it.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub score: f64,
    pub alphas: AlphaWeights,
    /// True when a fallback path was taken: collinear or rank-deficient
    /// constituents, or a term orthogonal to every constituent.
    pub degenerate: bool,
}

/// Cosine between `Σ αᵢ r̄ᵢ` and `r̄Σ`; zero when the combination vanishes.
fn achieved_cosine(
    units: &[EmbeddingVector],
    target: &EmbeddingVector,
    alphas: &AlphaWeights,
) -> Result<Option<f64>, ScoreError> {
    match vectors::weighted_sum(units, alphas.as_slice()) {
        Ok(mix) => Ok(Some(vectors::cosine(&mix, target)?)),
        Err(VectorError::AllZeroWeights) | Err(VectorError::ZeroVector) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn self_explainability(
    constituents: &[EmbeddingVector],
    rs: &EmbeddingVector,
) -> Result<Explanation, ScoreError> {
    if constituents.len() < 2 {
        return Err(ScoreError::TooFewConstituents(constituents.len()));
    }
    let units = constituents
        .iter()
        .map(vectors::normalize)
        .collect::<Result<Vec<_>, _>>()?;
    let target = vectors::normalize(rs)?;

    let (alphas, mut degenerate) = if units.len() == 2 {
        let triple = vectors::similarity_triple(&units[0], &units[1], &target)?;
        match optimal_alpha_pair(&triple) {
            Ok(alphas) => (alphas, false),
            Err(ScoreError::CollinearConstituents(_)) => {
                // The span is the line through r1; project onto it.
                let sign = if triple.r1s < 0.0 { -1.0 } else { 1.0 };
                let mut alphas = vec![0.0; 2];
                alphas[0] = sign;
                return Ok(Explanation {
                    score: triple.r1s.abs(),
                    alphas: AlphaWeights(alphas),
                    degenerate: true,
                });
            }
            Err(e) => return Err(e),
        }
    } else {
        let solution = optimal_alpha_general(&units, &target)?;
        (solution.weights, solution.rank_deficient)
    };

    let score = match achieved_cosine(&units, &target, &alphas)? {
        Some(c) => c.clamp(0.0, 1.0),
        None => {
            degenerate = true;
            0.0
        }
    };
    Ok(Explanation {
        score,
        alphas,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTerm {
    pub term: String,
    pub constituents: Vec<String>,
    pub score: f64,
    pub alphas: AlphaWeights,
    pub degenerate: bool,
}

/// A term whose full-text or constituent embedding was not in the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingEmbedding {
    pub term: String,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedTerm {
    pub term: String,
    pub error: ScoreError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    pub scored: Vec<ScoredTerm>,
    pub missing: Vec<MissingEmbedding>,
    pub rejected: Vec<RejectedTerm>,
}

impl BatchOutcome {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.rejected.is_empty()
    }
}

enum TermResult {
    Scored(ScoredTerm),
    Missing(Vec<MissingEmbedding>),
    Rejected(RejectedTerm),
}

fn score_one(record: &TermRecord, store: &EmbeddingStore) -> TermResult {
    let mut missing = Vec::new();
    let mut lookup = |key: &str| {
        let v = store.get(key);
        if v.is_none() {
            missing.push(MissingEmbedding {
                term: record.term.clone(),
                key: key.to_string(),
            });
        }
        v
    };
    let whole = lookup(&record.term);
    let parts: Vec<Option<EmbeddingVector>> =
        record.constituents.iter().map(|w| lookup(w)).collect();
    if !missing.is_empty() {
        // The same word may appear twice in a term; report each key once.
        missing.dedup_by(|a, b| a.key == b.key);
        return TermResult::Missing(missing);
    }
    let whole = whole.expect("checked above");
    let parts: Vec<EmbeddingVector> = parts
        .into_iter()
        .map(|p| p.expect("checked above"))
        .collect();

    match self_explainability(&parts, &whole) {
        Ok(e) => TermResult::Scored(ScoredTerm {
            term: record.term.clone(),
            constituents: record.constituents.clone(),
            score: e.score,
            alphas: e.alphas,
            degenerate: e.degenerate,
        }),
        Err(error) => TermResult::Rejected(RejectedTerm {
            term: record.term.clone(),
            error,
        }),
    }
}

/// Scores every term against the store, preserving input order.
pub fn score_batch(terms: &[TermRecord], store: &EmbeddingStore, exec: Execution) -> BatchOutcome {
    let results: Vec<TermResult> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            terms.par_iter().map(|t| score_one(t, store)).collect()
        }
        _ => terms.iter().map(|t| score_one(t, store)).collect(),
    };

    let mut outcome = BatchOutcome::default();
    for r in results {
        match r {
            TermResult::Scored(s) => outcome.scored.push(s),
            TermResult::Missing(m) => outcome.missing.extend(m),
            TermResult::Rejected(r) => outcome.rejected.push(r),
        }
    }
    outcome
}
