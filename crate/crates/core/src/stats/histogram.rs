use super::StatsError;

/// Uniform bins over `[0, 1]`. Every bin is right-open except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_of(&self, score: f64) -> usize {
        bin_index(score, self.bins())
    }

    pub fn center(&self, bin: usize) -> f64 {
        (self.edges[bin] + self.edges[bin + 1]) / 2.0
    }

    /// Count-weighted mean of bin centers.
    pub fn center_mean(&self) -> Option<f64> {
        weighted_center_mean(self, self.counts.iter().map(|&c| c as f64))
    }
}

fn bin_index(score: f64, bins: usize) -> usize {
    ((score * bins as f64).floor() as usize).min(bins - 1)
}

fn uniform_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| i as f64 / bins as f64).collect()
}

fn check_score(s: f64) -> Result<(), StatsError> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(StatsError::OutOfRange(s))
    }
}

pub fn histogram(scores: &[f64], bins: usize) -> Result<Histogram, StatsError> {
    if bins == 0 {
        return Err(StatsError::ZeroBins);
    }
    if scores.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut counts = vec![0u64; bins];
    for &s in scores {
        check_score(s)?;
        counts[bin_index(s, bins)] += 1;
    }
    Ok(Histogram {
        edges: uniform_edges(bins),
        counts,
    })
}

/// Per-bin share of annotated terms that were labeled idiomatic.
#[derive(Debug, Clone, PartialEq)]
pub struct BinRatioEstimate {
    edges: Vec<f64>,
    annotated: Vec<u64>,
    idiomatic: Vec<u64>,
}

impl BinRatioEstimate {
    /// Builds the estimate from raw per-bin counts.
    pub fn from_counts(
        edges: Vec<f64>,
        annotated: Vec<u64>,
        idiomatic: Vec<u64>,
    ) -> Result<Self, StatsError> {
        if edges.len() != annotated.len() + 1 || annotated.len() != idiomatic.len() {
            return Err(StatsError::BinMismatch);
        }
        if idiomatic.iter().zip(&annotated).any(|(i, a)| i > a) {
            return Err(StatsError::BinMismatch);
        }
        Ok(Self {
            edges,
            annotated,
            idiomatic,
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn annotated(&self) -> &[u64] {
        &self.annotated
    }

    pub fn idiomatic(&self) -> &[u64] {
        &self.idiomatic
    }

    /// Zero for bins nobody annotated.
    pub fn ratio(&self, bin: usize) -> f64 {
        match self.annotated[bin] {
            0 => 0.0,
            a => self.idiomatic[bin] as f64 / a as f64,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        (0..self.annotated.len()).map(|b| self.ratio(b)).collect()
    }
}

/// Bins labeled `(score, is_idiomatic)` pairs on the histogram's edges.
pub fn bin_ratios(h: &Histogram, labeled: &[(f64, bool)]) -> Result<BinRatioEstimate, StatsError> {
    let bins = h.bins();
    let mut annotated = vec![0u64; bins];
    let mut idiomatic = vec![0u64; bins];
    for &(s, idio) in labeled {
        check_score(s)?;
        let b = bin_index(s, bins);
        annotated[b] += 1;
        if idio {
            idiomatic[b] += 1;
        }
    }
    BinRatioEstimate::from_counts(h.edges.clone(), annotated, idiomatic)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdiomaticEstimate {
    /// `count_b × ratio_b` per bin.
    pub counts: Vec<f64>,
    /// Bin-center mean weighted by the estimated counts.
    pub mean: Option<f64>,
}

fn weighted_center_mean(h: &Histogram, weights: impl Iterator<Item = f64>) -> Option<f64> {
    let (num, den) = weights.enumerate().fold((0.0, 0.0), |(num, den), (b, w)| {
        (num + w * h.center(b), den + w)
    });
    (den > 0.0).then(|| num / den)
}

pub fn estimate_idiomatic_distribution(
    h: &Histogram,
    ratios: &BinRatioEstimate,
) -> Result<IdiomaticEstimate, StatsError> {
    if ratios.edges.len() != h.edges.len()
        || ratios
            .edges
            .iter()
            .zip(&h.edges)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(StatsError::BinMismatch);
    }
    let counts: Vec<f64> = h
        .counts
        .iter()
        .enumerate()
        .map(|(b, &c)| c as f64 * ratios.ratio(b))
        .collect();
    let mean = weighted_center_mean(h, counts.iter().copied());
    Ok(IdiomaticEstimate { counts, mean })
}
