//! Dense real-vector primitives.
//!
//! Everything here works in `f64`, whatever precision the vectors were stored
//! at. Vectors that are empty, all-zero, or contain NaN/Inf are rejected when
//! an [`EmbeddingVector`] is built, so downstream code never has to guard
//! against them again.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("zero or non-finite vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("vector count {vectors} does not match weight count {weights}")]
    CountMismatch { vectors: usize, weights: usize },
    #[error("all weights are zero")]
    AllZeroWeights,
}

/// A finite, nonzero, fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) || values.iter().all(|&v| v == 0.0) {
            return Err(VectorError::ZeroVector);
        }
        Ok(Self { values })
    }

    /// Widens 32-bit stored values.
    pub fn from_f32(values: &[f32]) -> Result<Self, VectorError> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, VectorError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = VectorError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

/// Pairwise cosines of two constituents and the whole term, after unit
/// normalization (so the self-products are all 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTriple {
    pub r12: f64,
    pub r1s: f64,
    pub r2s: f64,
}

impl SimilarityTriple {
    /// Builds a triple from raw cosines, clamping each into `[-1, 1]`.
    pub fn new(r12: f64, r1s: f64, r2s: f64) -> Self {
        Self {
            r12: clamp_cosine(r12),
            r1s: clamp_cosine(r1s),
            r2s: clamp_cosine(r2s),
        }
    }
}

#[inline]
pub(crate) fn clamp_cosine(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(), VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

pub fn dot(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    check_dims(a, b)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector, VectorError> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(VectorError::ZeroVector);
    }
    EmbeddingVector::new(v.values.iter().map(|x| x / norm).collect())
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    check_dims(a, b)?;
    let na = normalize(a)?;
    let nb = normalize(b)?;
    Ok(clamp_cosine(dot(&na, &nb)?))
}

/// Componentwise `Σ wᵢ vᵢ`.
pub fn weighted_sum(
    vectors: &[EmbeddingVector],
    weights: &[f64],
) -> Result<EmbeddingVector, VectorError> {
    let first = vectors.first().ok_or(VectorError::EmptyInput)?;
    if vectors.len() != weights.len() {
        return Err(VectorError::CountMismatch {
            vectors: vectors.len(),
            weights: weights.len(),
        });
    }
    for v in &vectors[1..] {
        check_dims(first, v)?;
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(VectorError::AllZeroWeights);
    }
    let mut acc = vec![0.0; first.dim()];
    for (v, &w) in vectors.iter().zip(weights) {
        for (a, x) in acc.iter_mut().zip(&v.values) {
            *a += w * x;
        }
    }
    // A nonzero weight vector can still cancel out exactly (e.g. v and -v).
    EmbeddingVector::new(acc)
}

pub fn similarity_triple(
    r1: &EmbeddingVector,
    r2: &EmbeddingVector,
    rs: &EmbeddingVector,
) -> Result<SimilarityTriple, VectorError> {
    check_dims(r1, r2)?;
    check_dims(r1, rs)?;
    let (n1, n2, ns) = (normalize(r1)?, normalize(r2)?, normalize(rs)?);
    Ok(SimilarityTriple::new(
        dot(&n1, &n2)?,
        dot(&n1, &ns)?,
        dot(&n2, &ns)?,
    ))
}
