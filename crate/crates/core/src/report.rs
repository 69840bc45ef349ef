//! File-to-file commands: filter, fetch, score, outliers, eval, hist.
//!
//! Every output is plain CSV or JSON. Reals are written with six decimals,
//! rankings sort by the written score and then by term text, so reruns on
//! the same inputs are byte-identical.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::embed_client::{self, ClientConfig, FetchReport, Transport};
use crate::ingest::{
    self, annotators, by_annotator, AnnotatedTerm, EmbeddingStore, IngestError, TermRecord,
};
use crate::scorer::{self, ScoredTerm};
use crate::stats::{self, OperatingPoint, StatsError};
use crate::Execution;

pub const DEFAULT_TAIL_FRACTION: f64 = 0.05;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: line {line}: {reason}", path.display())]
    ScoresFormat {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("annotator {0:?} not found in annotations")]
    UnknownAnnotator(String),
    #[error("store model {store:?} differs from requested model {requested:?}")]
    ModelMismatch { store: String, requested: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, ReportError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, ReportError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.6}")
}

/// The value a reader of our CSVs will see.
fn written(x: f64) -> f64 {
    fmt_real(x).parse().expect("formatted float parses")
}

fn read_terms(path: &Path) -> Result<Vec<TermRecord>, ReportError> {
    ingest::parse_terms(open(path)?).map_err(|e| match e {
        IngestError::Io(source) => ReportError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other.into(),
    })
}

// ---------------------------------------------------------------- filter

#[derive(Debug, Clone)]
pub struct FilterOptions {
    pub max_freq: u64,
    pub min_freq: u64,
    pub dedup: bool,
    /// Name inventory for word counts; defaults to the input list itself.
    pub vocab_names: Option<PathBuf>,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            max_freq: ingest::DEFAULT_MAX_FREQ,
            min_freq: ingest::DEFAULT_MIN_FREQ,
            dedup: false,
            vocab_names: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterSummary {
    pub names: usize,
    pub kept: usize,
}

pub fn cmd_filter(
    names: &Path,
    out: &Path,
    opts: &FilterOptions,
) -> Result<FilterSummary, ReportError> {
    let records = read_terms(names)?;
    let vocab = match &opts.vocab_names {
        Some(p) => ingest::build_vocab(&read_terms(p)?),
        None => ingest::build_vocab(&records),
    };
    let mut kept = ingest::filter_two_word_terms(&records, &vocab, opts.max_freq, opts.min_freq);
    if opts.dedup {
        kept = ingest::dedup_terms(kept);
    }
    let mut w = create(out)?;
    for t in &kept {
        writeln!(w, "{}", t.term).map_err(io_err(out))?;
    }
    w.flush().map_err(io_err(out))?;
    Ok(FilterSummary {
        names: records.len(),
        kept: kept.len(),
    })
}

// ---------------------------------------------------------------- fetch

/// Whole terms followed by their words, first occurrence order, no repeats.
pub fn fetch_keys(terms: &[TermRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut keys = Vec::new();
    for t in terms {
        for k in std::iter::once(&t.term).chain(&t.constituents) {
            if seen.insert(k.as_str()) {
                keys.push(k.clone());
            }
        }
    }
    keys
}

pub fn cmd_fetch(
    terms: &Path,
    store_path: &Path,
    transport: &dyn Transport,
    cfg: &ClientConfig,
) -> Result<FetchReport, ReportError> {
    let records = read_terms(terms)?;
    let mut store = if store_path.exists() {
        EmbeddingStore::load(store_path)?
    } else {
        EmbeddingStore::new(cfg.model_id.clone())
    };
    if !cfg.model_id.is_empty() && store.model_id() != cfg.model_id {
        return Err(ReportError::ModelMismatch {
            store: store.model_id().to_string(),
            requested: cfg.model_id.clone(),
        });
    }
    let cfg = ClientConfig {
        model_id: store.model_id().to_string(),
        ..cfg.clone()
    };
    let report = embed_client::fetch_embeddings(&fetch_keys(&records), transport, &mut store, &cfg);
    if report.fetched > 0 {
        store.save(store_path)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreSummary {
    pub scored: usize,
    pub missing_terms: usize,
    pub rejected: usize,
    pub negative_alpha: usize,
    pub degenerate: usize,
}

impl ScoreSummary {
    pub fn is_partial(&self) -> bool {
        self.missing_terms > 0 || self.rejected > 0
    }
}

/// Ascending by written score, then by term.
pub fn rank_scored(scored: &mut [ScoredTerm]) {
    scored.sort_by(|a, b| {
        written(a.score)
            .total_cmp(&written(b.score))
            .then_with(|| a.term.cmp(&b.term))
    });
}

pub fn write_scores<W: Write>(out: W, scored: &[ScoredTerm]) -> csv::Result<()> {
    let width = scored
        .iter()
        .map(|s| s.alphas.len())
        .max()
        .unwrap_or(2)
        .max(2);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["term".to_string(), "score".to_string()];
    header.extend((1..=width).map(|i| format!("alpha{i}")));
    header.push("degenerate".into());
    w.write_record(&header)?;
    for s in scored {
        let mut row = vec![s.term.clone(), fmt_real(s.score)];
        row.extend((0..width).map(|i| s.alphas.0.get(i).map(|&a| fmt_real(a)).unwrap_or_default()));
        row.push(s.degenerate.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar path for terms that could not be scored: `scores.csv` becomes
/// `scores.missing.csv`.
pub fn sidecar_path(out_csv: &Path) -> PathBuf {
    out_csv.with_extension("missing.csv")
}

pub fn cmd_score(
    terms: &Path,
    store: &Path,
    out_csv: &Path,
    dedup: bool,
    exec: Execution,
) -> Result<ScoreSummary, ReportError> {
    let mut records = read_terms(terms)?;
    if dedup {
        records = ingest::dedup_terms(records);
    }
    let store = EmbeddingStore::load(store)?;
    let mut outcome = scorer::score_batch(&records, &store, exec);
    rank_scored(&mut outcome.scored);

    write_scores(create(out_csv)?, &outcome.scored).map_err(csv_err(out_csv))?;

    let side = sidecar_path(out_csv);
    let mut w = csv::Writer::from_writer(create(&side)?);
    let write_side = |w: &mut csv::Writer<_>| -> csv::Result<()> {
        w.write_record(["term", "issue", "detail"])?;
        for m in &outcome.missing {
            w.write_record([m.term.as_str(), "missing_embedding", m.key.as_str()])?;
        }
        for r in &outcome.rejected {
            w.write_record([r.term.as_str(), "rejected", &r.error.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write_side(&mut w).map_err(csv_err(&side))?;

    let missing_terms: HashSet<&str> = outcome.missing.iter().map(|m| m.term.as_str()).collect();
    let summary = ScoreSummary {
        scored: outcome.scored.len(),
        missing_terms: missing_terms.len(),
        rejected: outcome.rejected.len(),
        negative_alpha: outcome
            .scored
            .iter()
            .filter(|s| s.alphas.has_negative())
            .count(),
        degenerate: outcome.scored.iter().filter(|s| s.degenerate).count(),
    };
    if summary.negative_alpha > 0 {
        log::info!(
            "{} terms have a negative optimal weight",
            summary.negative_alpha
        );
    }
    Ok(summary)
}

// ---------------------------------------------------------------- scores CSV input

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub term: String,
    pub score: f64,
}

/// Reads the `term` and `score` columns of a scores CSV.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, ReportError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::ScoresFormat {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("missing column {name:?}"),
            })
    };
    let (ti, si) = (col("term")?, col("score")?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| ReportError::ScoresFormat {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let term = rec.get(ti).ok_or_else(|| bad("missing term".into()))?;
        let raw = rec.get(si).ok_or_else(|| bad("missing score".into()))?;
        let score: f64 = raw.parse().map_err(|_| bad(format!("bad score {raw:?}")))?;
        if !score.is_finite() {
            return Err(bad(format!("bad score {raw:?}")));
        }
        rows.push(ScoreRow {
            term: ingest::normalize_text(term),
            score,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------- outliers

/// Rows at or below the low-tail threshold, lowest first, optionally capped
/// at `top_k`.
pub fn select_outliers(
    rows: &[ScoreRow],
    tail_fraction: f64,
    top_k: Option<usize>,
) -> Result<Vec<ScoreRow>, StatsError> {
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let t = stats::low_tail_threshold(&scores, tail_fraction)?;
    let mut out: Vec<ScoreRow> = rows.iter().filter(|r| r.score <= t).cloned().collect();
    out.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| a.term.cmp(&b.term))
    });
    if let Some(k) = top_k {
        out.truncate(k);
    }
    Ok(out)
}

pub fn write_outliers<W: Write>(out: W, rows: &[ScoreRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "term", "score"])?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([(i + 1).to_string(), r.term.clone(), fmt_real(r.score)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_outliers(
    scores_csv: &Path,
    tail_fraction: f64,
    top_k: Option<usize>,
    out: &Path,
) -> Result<usize, ReportError> {
    let rows = read_scores(scores_csv)?;
    let selected = select_outliers(&rows, tail_fraction, top_k)?;
    write_outliers(create(out)?, &selected).map_err(csv_err(out))?;
    Ok(selected.len())
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub tail_fraction: f64,
    /// Annotator whose labels drive ROC and recall; first in file if unset.
    pub annotator: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            annotator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub annotator: String,
    pub n_scored: usize,
    pub n_labeled: usize,
    pub positives: usize,
    pub auc: f64,
    pub tail_fraction: f64,
    pub threshold: f64,
    pub selected_count: usize,
    pub operating_point: OperatingPoint,
    pub prevalence: f64,
    pub expected_precision: Option<f64>,
    pub second_annotator: Option<String>,
    pub agreement_n: Option<usize>,
    pub agreement: Option<f64>,
    pub kappa: Option<f64>,
    pub mean_all: f64,
    pub mean_idiomatic: Option<f64>,
    pub mean_self_explanatory: Option<f64>,
}

type Num = Option<Box<RawValue>>;

fn num(x: f64) -> Num {
    Some(RawValue::from_string(fmt_real(x)).expect("valid JSON number"))
}

fn opt_num(x: Option<f64>) -> Num {
    x.and_then(num)
}

fn int(x: usize) -> Num {
    Some(RawValue::from_string(x.to_string()).expect("valid JSON number"))
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    annotator: &'a str,
    n_scored: Num,
    n_labeled: Num,
    positives: Num,
    auc: Num,
    tail_fraction: Num,
    threshold: Num,
    selected_count: Num,
    labeled_selected: Num,
    recall: Num,
    precision: Num,
    prevalence: Num,
    expected_precision: Num,
    second_annotator: Option<&'a str>,
    agreement_n: Num,
    agreement: Num,
    kappa: Num,
    mean_all: Num,
    mean_idiomatic: Num,
    mean_self_explanatory: Num,
}

impl EvalSummary {
    pub fn to_json(&self) -> String {
        let op = &self.operating_point;
        let j = SummaryJson {
            annotator: &self.annotator,
            n_scored: int(self.n_scored),
            n_labeled: int(self.n_labeled),
            positives: int(self.positives),
            auc: num(self.auc),
            tail_fraction: num(self.tail_fraction),
            threshold: num(self.threshold),
            selected_count: int(self.selected_count),
            labeled_selected: int(op.selected_count),
            recall: opt_num(op.recall),
            precision: opt_num(op.precision),
            prevalence: num(self.prevalence),
            expected_precision: opt_num(self.expected_precision),
            second_annotator: self.second_annotator.as_deref(),
            agreement_n: self.agreement_n.and_then(int),
            agreement: opt_num(self.agreement),
            kappa: opt_num(self.kappa),
            mean_all: num(self.mean_all),
            mean_idiomatic: opt_num(self.mean_idiomatic),
            mean_self_explanatory: opt_num(self.mean_self_explanatory),
        };
        let mut s = serde_json::to_string_pretty(&j).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_roc<W: Write>(out: W, curve: &stats::RocCurve) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fpr", "tpr", "threshold"])?;
    for p in &curve.points {
        w.write_record([fmt_real(p.fpr), fmt_real(p.tpr), fmt_real(p.threshold)])?;
    }
    w.flush()?;
    Ok(())
}

fn primary_labels(
    labels: &[AnnotatedTerm],
    annotator: Option<&str>,
) -> Result<(String, Vec<AnnotatedTerm>), ReportError> {
    let ids = annotators(labels);
    let chosen = match annotator {
        Some(a) if ids.iter().any(|i| i == a) => a.to_string(),
        Some(a) => return Err(ReportError::UnknownAnnotator(a.to_string())),
        None => ids.first().cloned().ok_or(StatsError::DegenerateLabels)?,
    };
    let own = by_annotator(labels, &chosen);
    let mut seen = HashSet::new();
    for l in &own {
        if !seen.insert(l.term.as_str()) {
            return Err(StatsError::DuplicateTerm(l.term.clone()).into());
        }
    }
    Ok((chosen, own))
}

/// Agreement between the chosen annotator and the first other one, over the
/// terms both labeled.
fn agreement_with_next(
    labels: &[AnnotatedTerm],
    chosen: &str,
    own: &[AnnotatedTerm],
) -> Result<Option<(String, stats::Agreement)>, ReportError> {
    let Some(other) = annotators(labels).into_iter().find(|a| a != chosen) else {
        return Ok(None);
    };
    let theirs = by_annotator(labels, &other);
    let mine: HashSet<&str> = own.iter().map(|l| l.term.as_str()).collect();
    let shared_theirs: Vec<AnnotatedTerm> = theirs
        .into_iter()
        .filter(|l| mine.contains(l.term.as_str()))
        .collect();
    let shared: HashSet<&str> = shared_theirs.iter().map(|l| l.term.as_str()).collect();
    let shared_mine: Vec<AnnotatedTerm> = own
        .iter()
        .filter(|l| shared.contains(l.term.as_str()))
        .cloned()
        .collect();
    if shared_mine.is_empty() {
        return Ok(None);
    }
    Ok(Some((
        other,
        stats::cohen_kappa(&shared_mine, &shared_theirs)?,
    )))
}

pub fn evaluate(
    rows: &[ScoreRow],
    labels: &[AnnotatedTerm],
    opts: &EvalOptions,
) -> Result<(EvalSummary, stats::RocCurve), ReportError> {
    let (annotator, own) = primary_labels(labels, opts.annotator.as_deref())?;
    let pairs = stats::labeled_pairs(rows.iter().map(|r| (r.term.as_str(), r.score)), &own)?;
    let curve = stats::roc_from_pairs(&pairs)?;

    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let threshold = stats::low_tail_threshold(&scores, opts.tail_fraction)?;
    let selected_count = scores.iter().filter(|&&s| s <= threshold).count();
    let op = OperatingPoint::from_pairs(threshold, &pairs);

    let positives = pairs.iter().filter(|p| p.1).count();
    let prevalence = positives as f64 / pairs.len() as f64;
    let expected = op
        .recall
        .map(|r| stats::expected_precision(prevalence, r, opts.tail_fraction));

    let agreement = agreement_with_next(labels, &annotator, &own)?;
    let summary = EvalSummary {
        n_scored: rows.len(),
        n_labeled: pairs.len(),
        positives,
        auc: curve.auc,
        tail_fraction: opts.tail_fraction,
        threshold,
        selected_count,
        operating_point: op,
        prevalence,
        expected_precision: expected,
        second_annotator: agreement.as_ref().map(|a| a.0.clone()),
        agreement_n: agreement.as_ref().map(|a| a.1.n),
        agreement: agreement.as_ref().map(|a| a.1.agreement),
        kappa: agreement.as_ref().and_then(|a| a.1.kappa_opt()),
        mean_all: stats::mean(scores.iter().copied()).expect("nonempty"),
        mean_idiomatic: stats::mean(pairs.iter().filter(|p| p.1).map(|p| p.0)),
        mean_self_explanatory: stats::mean(pairs.iter().filter(|p| !p.1).map(|p| p.0)),
        annotator,
    };
    Ok((summary, curve))
}

fn read_annotations(path: &Path) -> Result<Vec<AnnotatedTerm>, ReportError> {
    Ok(ingest::parse_annotations(open(path)?)?)
}

/// Writes `roc.csv` and `summary.json` into `out_dir`.
pub fn cmd_eval(
    scores_csv: &Path,
    annotations_csv: &Path,
    out_dir: &Path,
    opts: &EvalOptions,
) -> Result<EvalSummary, ReportError> {
    let rows = read_scores(scores_csv)?;
    let labels = read_annotations(annotations_csv)?;
    let (summary, curve) = evaluate(&rows, &labels, opts)?;

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let roc_path = out_dir.join("roc.csv");
    write_roc(create(&roc_path)?, &curve).map_err(csv_err(&roc_path))?;
    let json_path = out_dir.join("summary.json");
    fs::write(&json_path, summary.to_json()).map_err(io_err(&json_path))?;
    Ok(summary)
}

// ---------------------------------------------------------------- hist

#[derive(Debug, Clone, PartialEq)]
pub struct HistSummary {
    pub n: usize,
    pub mean: f64,
    pub bin_center_mean: f64,
    pub estimated_idiomatic_mean: Option<f64>,
}

impl HistSummary {
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct J {
            n: Num,
            mean: Num,
            bin_center_mean: Num,
            estimated_idiomatic_mean: Num,
        }
        serde_json::to_string(&J {
            n: int(self.n),
            mean: num(self.mean),
            bin_center_mean: num(self.bin_center_mean),
            estimated_idiomatic_mean: opt_num(self.estimated_idiomatic_mean),
        })
        .expect("summary serializes")
    }
}

pub fn write_histogram<W: Write>(out: W, h: &stats::Histogram) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_low", "bin_high", "count"])?;
    for (b, c) in h.counts().iter().enumerate() {
        w.write_record([
            fmt_real(h.edges()[b]),
            fmt_real(h.edges()[b + 1]),
            c.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimate<W: Write>(
    out: W,
    h: &stats::Histogram,
    ratios: &stats::BinRatioEstimate,
    est: &stats::IdiomaticEstimate,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bin_low",
        "bin_high",
        "count",
        "annotated",
        "idiomatic",
        "ratio",
        "estimated",
    ])?;
    for b in 0..h.bins() {
        w.write_record([
            fmt_real(h.edges()[b]),
            fmt_real(h.edges()[b + 1]),
            h.counts()[b].to_string(),
            ratios.annotated()[b].to_string(),
            ratios.idiomatic()[b].to_string(),
            fmt_real(ratios.ratio(b)),
            fmt_real(est.counts[b]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Where the idiomatic-distribution estimate comes from and goes to.
#[derive(Debug, Clone)]
pub struct EstimateSpec {
    pub annotations: PathBuf,
    pub annotator: Option<String>,
    pub out: PathBuf,
}

pub fn cmd_hist(
    scores_csv: &Path,
    bins: usize,
    out: &Path,
    estimate: Option<&EstimateSpec>,
) -> Result<HistSummary, ReportError> {
    let rows = read_scores(scores_csv)?;
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let h = stats::histogram(&scores, bins)?;
    write_histogram(create(out)?, &h).map_err(csv_err(out))?;

    let mut summary = HistSummary {
        n: scores.len(),
        mean: stats::mean(scores.iter().copied()).expect("nonempty"),
        bin_center_mean: h.center_mean().expect("nonempty"),
        estimated_idiomatic_mean: None,
    };
    if let Some(spec) = estimate {
        let labels = read_annotations(&spec.annotations)?;
        let (_, own) = primary_labels(&labels, spec.annotator.as_deref())?;
        let pairs = stats::labeled_pairs(rows.iter().map(|r| (r.term.as_str(), r.score)), &own)?;
        let ratios = stats::bin_ratios(&h, &pairs)?;
        let est = stats::estimate_idiomatic_distribution(&h, &ratios)?;
        write_estimate(create(&spec.out)?, &h, &ratios, &est).map_err(csv_err(&spec.out))?;
        summary.estimated_idiomatic_mean = est.mean;
    }
    Ok(summary)
}
