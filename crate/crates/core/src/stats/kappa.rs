use std::collections::BTreeMap;

use super::StatsError;
use crate::ingest::{AnnotatedTerm, Label};

/// Raw agreement plus Cohen's kappa between two annotators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub n: usize,
    pub agreement: f64,
    pub chance: f64,
    kappa: Option<f64>,
}

impl Agreement {
    pub fn kappa(&self) -> Result<f64, StatsError> {
        self.kappa.ok_or(StatsError::KappaUndefined)
    }

    pub fn kappa_opt(&self) -> Option<f64> {
        self.kappa
    }
}

fn index(labels: &[AnnotatedTerm]) -> Result<BTreeMap<&str, Label>, StatsError> {
    let mut map = BTreeMap::new();
    for l in labels {
        if map.insert(l.term.as_str(), l.label).is_some() {
            return Err(StatsError::DuplicateTerm(l.term.clone()));
        }
    }
    Ok(map)
}

pub fn cohen_kappa(a: &[AnnotatedTerm], b: &[AnnotatedTerm]) -> Result<Agreement, StatsError> {
    let (ia, ib) = (index(a)?, index(b)?);
    if ia.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if ia.len() != ib.len() || ia.keys().zip(ib.keys()).any(|(x, y)| x != y) {
        return Err(StatsError::TermSetMismatch);
    }
    let n = ia.len() as f64;
    let mut same = 0usize;
    let (mut idio_a, mut idio_b) = (0usize, 0usize);
    for (la, lb) in ia.values().zip(ib.values()) {
        same += usize::from(la == lb);
        idio_a += usize::from(la.is_idiomatic());
        idio_b += usize::from(lb.is_idiomatic());
    }
    let po = same as f64 / n;
    let (pa, pb) = (idio_a as f64 / n, idio_b as f64 / n);
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    let kappa = (pe < 1.0).then(|| (po - pe) / (1.0 - pe));
    Ok(Agreement {
        n: ia.len(),
        agreement: po,
        chance: pe,
        kappa,
    })
}
