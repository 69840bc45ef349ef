use std::fmt;
use std::io::Read;

use super::terms::normalize_text;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Perceived as idiomatic or semi-idiomatic.
    Idiomatic,
    SelfExplanatory,
}

impl Label {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim() {
            "idiomatic" | "semi_idiomatic" => Some(Label::Idiomatic),
            "self_explanatory" => Some(Label::SelfExplanatory),
            _ => None,
        }
    }

    pub fn is_idiomatic(self) -> bool {
        self == Label::Idiomatic
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Idiomatic => "idiomatic",
            Label::SelfExplanatory => "self_explanatory",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTerm {
    pub term: String,
    pub label: Label,
    pub annotator: String,
}

const COLUMNS: [&str; 3] = ["term", "label", "annotator"];

/// Reads a `term,label,annotator` CSV.
pub fn parse_annotations<R: Read>(source: R) -> Result<Vec<AnnotatedTerm>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 3];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(IngestError::MissingColumn(name))?;
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| {
            record
                .get(idx[i])
                .ok_or(IngestError::MissingColumn(COLUMNS[i]))
        };
        let raw_label = field(1)?;
        let label = Label::parse(raw_label).ok_or_else(|| IngestError::UnknownLabel {
            line,
            label: raw_label.to_string(),
        })?;
        out.push(AnnotatedTerm {
            term: normalize_text(field(0)?),
            label,
            annotator: field(2)?.to_string(),
        });
    }
    Ok(out)
}

/// Annotator ids in order of first appearance.
pub fn annotators(labels: &[AnnotatedTerm]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for l in labels {
        if !ids.contains(&l.annotator) {
            ids.push(l.annotator.clone());
        }
    }
    ids
}

pub fn by_annotator(labels: &[AnnotatedTerm], annotator: &str) -> Vec<AnnotatedTerm> {
    labels
        .iter()
        .filter(|l| l.annotator == annotator)
        .cloned()
        .collect()
}
