use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use super::IngestError;

/// A multiword term and its whitespace-separated words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TermRecord {
    pub term: String,
    pub constituents: Vec<String>,
}

impl TermRecord {
    /// Collapses whitespace runs and splits on them. Returns `None` for
    /// blank input.
    pub fn parse(raw: &str) -> Option<Self> {
        let constituents: Vec<String> = raw.split_whitespace().map(str::to_owned).collect();
        if constituents.is_empty() {
            return None;
        }
        Some(Self {
            term: constituents.join(" "),
            constituents,
        })
    }

    pub fn word_count(&self) -> usize {
        self.constituents.len()
    }
}

/// Collapses internal whitespace runs and trims.
pub fn normalize_text(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One term per line; blank lines are skipped, duplicates kept.
pub fn parse_terms<R: BufRead>(mut source: R) -> Result<Vec<TermRecord>, IngestError> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if source.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| IngestError::InvalidEncoding(line_no))?;
        if let Some(record) = TermRecord::parse(line) {
            out.push(record);
        }
    }
    Ok(out)
}

/// Keeps the first occurrence of each term string.
pub fn dedup_terms(terms: Vec<TermRecord>) -> Vec<TermRecord> {
    let mut seen = HashSet::new();
    terms
        .into_iter()
        .filter(|t| seen.insert(t.term.clone()))
        .collect()
}

/// Word occurrence counts over a name inventory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabFrequency {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl VocabFrequency {
    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

pub fn build_vocab(names: &[TermRecord]) -> VocabFrequency {
    let mut vocab = VocabFrequency::default();
    for name in names {
        for word in &name.constituents {
            *vocab.counts.entry(word.clone()).or_insert(0) += 1;
            vocab.total += 1;
        }
    }
    vocab
}

pub const DEFAULT_MAX_FREQ: u64 = 10_000;
pub const DEFAULT_MIN_FREQ: u64 = 10;

/// Two-word terms whose words all occur between `min_freq` and `max_freq`
/// times, both bounds inclusive.
pub fn filter_two_word_terms(
    terms: &[TermRecord],
    vocab: &VocabFrequency,
    max_freq: u64,
    min_freq: u64,
) -> Vec<TermRecord> {
    terms
        .iter()
        .filter(|t| t.word_count() == 2)
        .filter(|t| {
            t.constituents.iter().all(|w| {
                let c = vocab.count(w);
                c >= min_freq && c <= max_freq
            })
        })
        .cloned()
        .collect()
}
