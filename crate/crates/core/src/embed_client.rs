//! Batched embedding fetches with a write-through cache.
//!
//! Wire contract: `POST <endpoint>/embed` with `{"texts":[...],"model_id":"..."}`,
//! answered by `{"dim":<int>,"vectors":[[...],...]}`. Anything other than a
//! 200 is retried with exponential backoff, except 400 and 422.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::EmbeddingStore;

pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("undecodable response: {0}")]
    Decode(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status(400) | TransportError::Status(422) => false,
            TransportError::Status(_) | TransportError::Timeout | TransportError::Connection(_) => {
                true
            }
            TransportError::Decode(_) => false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("got {found} vectors for {expected} texts")]
    CountMismatch { expected: usize, found: usize },
    #[error("vector dimension {found} does not match expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid vector for {0:?}")]
    InvalidVector(String),
}

/// Something that can answer an embedding request.
pub trait Transport: Sync {
    fn embed(&self, request: &EmbedRequest) -> Result<EmbedResponse, TransportError>;
}

/// HTTP transport for the `/embed` contract.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    bearer: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration, bearer: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            bearer,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Transport for HttpTransport {
    fn embed(&self, request: &EmbedRequest) -> Result<EmbedResponse, TransportError> {
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(request).map_err(map_ureq_error)?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(TransportError::Status(status));
        }
        resp.body_mut()
            .read_json::<EmbedResponse>()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => TransportError::Timeout,
                other => TransportError::Decode(other.to_string()),
            })
    }
}

fn map_ureq_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::StatusCode(s) => TransportError::Status(s),
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Connection(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub model_id: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retries: u32,
    /// Delay before the first retry; doubles on each further attempt.
    pub backoff: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            model_id: String::new(),
            batch_size: DEFAULT_BATCH_SIZE,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retries: DEFAULT_RETRIES,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFailure {
    /// Zero-based index among the batches sent in this run.
    pub batch: usize,
    pub texts: Vec<String>,
    pub error: EmbedError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchReport {
    /// Distinct texts considered.
    pub unique: usize,
    pub cached: usize,
    pub fetched: usize,
    pub failed: usize,
    /// Batches sent, not counting retries.
    pub batches: usize,
    /// HTTP attempts including retries.
    pub attempts: usize,
    pub failures: Vec<BatchFailure>,
}

impl FetchReport {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

fn send_with_retry(
    transport: &dyn Transport,
    request: &EmbedRequest,
    cfg: &ClientConfig,
) -> (Result<EmbedResponse, TransportError>, usize) {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match transport.embed(request) {
            Ok(r) => return (Ok(r), attempts),
            Err(e) if e.is_retryable() && attempts <= cfg.retries as usize => {
                let delay = cfg.backoff.saturating_mul(1 << (attempts - 1).min(16));
                log::warn!("embed attempt {attempts} failed ({e}); retrying in {delay:?}");
                std::thread::sleep(delay);
            }
            Err(e) => return (Err(e), attempts),
        }
    }
}

/// Checks a response and, only if every vector is acceptable, writes the
/// whole batch into the store.
fn commit_batch(
    store: &mut EmbeddingStore,
    texts: &[String],
    response: EmbedResponse,
) -> Result<(), EmbedError> {
    if response.vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch {
            expected: texts.len(),
            found: response.vectors.len(),
        });
    }
    let expected = store.dim().unwrap_or(response.dim);
    if response.dim != expected {
        return Err(EmbedError::DimMismatch {
            expected,
            found: response.dim,
        });
    }
    for (text, v) in texts.iter().zip(&response.vectors) {
        if v.len() != expected {
            return Err(EmbedError::DimMismatch {
                expected,
                found: v.len(),
            });
        }
        store
            .validate(v)
            .map_err(|_| EmbedError::InvalidVector(text.clone()))?;
    }
    for (text, v) in texts.iter().zip(&response.vectors) {
        store
            .insert(text.clone(), v)
            .expect("validated before commit");
    }
    Ok(())
}

/// Fetches every text missing from `store`, in batches of
/// `cfg.batch_size` with up to `cfg.max_in_flight` requests at once.
/// Failed batches leave the store untouched for their keys.
pub fn fetch_embeddings(
    texts: &[String],
    transport: &dyn Transport,
    store: &mut EmbeddingStore,
    cfg: &ClientConfig,
) -> FetchReport {
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<&String> = texts.iter().filter(|t| seen.insert(t.as_str())).collect();
    let pending: Vec<String> = unique
        .iter()
        .filter(|t| !store.contains(t))
        .map(|t| (*t).clone())
        .collect();

    let mut report = FetchReport {
        unique: unique.len(),
        cached: unique.len() - pending.len(),
        ..FetchReport::default()
    };

    let batches: Vec<&[String]> = pending.chunks(cfg.batch_size.max(1)).collect();
    report.batches = batches.len();

    let wave = cfg.max_in_flight.max(1);
    for (wave_no, group) in batches.chunks(wave).enumerate() {
        let results: Vec<(Result<EmbedResponse, TransportError>, usize)> =
            std::thread::scope(|s| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|batch| {
                        let request = EmbedRequest {
                            texts: batch.to_vec(),
                            model_id: cfg.model_id.clone(),
                        };
                        s.spawn(move || send_with_retry(transport, &request, cfg))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("fetch worker panicked"))
                    .collect()
            });

        // Single writer: commit in batch order once the wave has landed.
        for (i, (batch, (result, attempts))) in group.iter().zip(results).enumerate() {
            report.attempts += attempts;
            let outcome = result
                .map_err(EmbedError::from)
                .and_then(|resp| commit_batch(store, batch, resp));
            match outcome {
                Ok(()) => report.fetched += batch.len(),
                Err(error) => {
                    report.failed += batch.len();
                    report.failures.push(BatchFailure {
                        batch: wave_no * wave + i,
                        texts: batch.to_vec(),
                        error,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    /// Embeds text `t` as `[len(t), 1, 0, ...]` and counts calls.
    struct FakeServer {
        dim: usize,
        calls: AtomicUsize,
        sizes: Mutex<Vec<usize>>,
        fail_first: AtomicUsize,
        fail_with: TransportError,
        drop_last_vector: bool,
    }

    impl FakeServer {
        fn new(dim: usize) -> Self {
            Self {
                dim,
                calls: AtomicUsize::new(0),
                sizes: Mutex::new(Vec::new()),
                fail_first: AtomicUsize::new(0),
                fail_with: TransportError::Status(503),
                drop_last_vector: false,
            }
        }
    }

    impl Transport for FakeServer {
        fn embed(&self, request: &EmbedRequest) -> Result<EmbedResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.sizes.lock().unwrap().push(request.texts.len());
            if self
                .fail_first
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                return Err(self.fail_with.clone());
            }
            let mut vectors: Vec<Vec<f32>> = request
                .texts
                .iter()
                .map(|t| {
                    let mut v = vec![0.0; self.dim];
                    v[0] = t.len() as f32;
                    v[1] = 1.0;
                    v
                })
                .collect();
            if self.drop_last_vector {
                vectors.pop();
            }
            Ok(EmbedResponse {
                dim: self.dim,
                vectors,
            })
        }
    }

    fn cfg() -> ClientConfig {
        ClientConfig {
            model_id: "fake".into(),
            backoff: Duration::from_millis(1),
            ..ClientConfig::default()
        }
    }

    fn texts(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("text {i}")).collect()
    }

    #[test]
    fn cached_texts_issue_no_requests() {
        let server = FakeServer::new(4);
        let mut store = EmbeddingStore::new("fake");
        for t in texts(3) {
            store.insert(t, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        }
        let report = fetch_embeddings(&texts(3), &server, &mut store, &cfg());
        assert_eq!(server.calls.load(Ordering::SeqCst), 0);
        assert_eq!((report.cached, report.fetched, report.batches), (3, 0, 0));
    }

    #[test]
    fn batches_by_ceiling() {
        let server = FakeServer::new(4);
        let mut store = EmbeddingStore::new("fake");
        let report = fetch_embeddings(&texts(130), &server, &mut store, &cfg());
        assert_eq!(report.batches, 3);
        assert_eq!(server.calls.load(Ordering::SeqCst), 3);
        let mut sizes = server.sizes.lock().unwrap().clone();
        sizes.sort();
        assert_eq!(sizes, vec![2, 64, 64]);
        assert_eq!(store.len(), 130);
        assert_eq!(report.fetched, 130);

        // second run is a no-op
        let again = fetch_embeddings(&texts(130), &server, &mut store, &cfg());
        assert_eq!(again.batches, 0);
        assert_eq!(server.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn count_mismatch_does_not_commit() {
        let server = FakeServer {
            drop_last_vector: true,
            ..FakeServer::new(4)
        };
        let mut store = EmbeddingStore::new("fake");
        let report = fetch_embeddings(&texts(3), &server, &mut store, &cfg());
        assert!(store.is_empty());
        assert_eq!(report.failed, 3);
        assert_eq!(
            report.failures[0].error,
            EmbedError::CountMismatch {
                expected: 3,
                found: 2
            }
        );
    }

    #[test]
    fn dim_checked_against_store() {
        let server = FakeServer::new(4);
        let mut store = EmbeddingStore::new("fake");
        store.insert("existing", &[1.0, 2.0, 3.0]).unwrap();
        let report = fetch_embeddings(&texts(2), &server, &mut store, &cfg());
        assert_eq!(
            report.failures[0].error,
            EmbedError::DimMismatch {
                expected: 3,
                found: 4
            }
        );
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn transient_errors_are_retried() {
        let server = FakeServer::new(4);
        server.fail_first.store(2, Ordering::SeqCst);
        let mut store = EmbeddingStore::new("fake");
        let report = fetch_embeddings(&texts(5), &server, &mut store, &cfg());
        assert!(report.is_success());
        assert_eq!(report.attempts, 3);
        assert_eq!(store.len(), 5);
    }

    #[test]
    fn retries_are_bounded() {
        let server = FakeServer::new(4);
        server.fail_first.store(100, Ordering::SeqCst);
        let mut store = EmbeddingStore::new("fake");
        let report = fetch_embeddings(&texts(5), &server, &mut store, &cfg());
        assert_eq!(report.attempts, 4);
        assert_eq!(
            report.failures[0].error,
            EmbedError::Transport(TransportError::Status(503))
        );
    }

    #[test]
    fn client_errors_not_retried() {
        for status in [400, 422] {
            let server = FakeServer {
                fail_with: TransportError::Status(status),
                ..FakeServer::new(4)
            };
            server.fail_first.store(100, Ordering::SeqCst);
            let mut store = EmbeddingStore::new("fake");
            let report = fetch_embeddings(&texts(1), &server, &mut store, &cfg());
            assert_eq!(report.attempts, 1);
            assert_eq!(report.failed, 1);
        }
        assert!(TransportError::Status(404).is_retryable());
        assert!(TransportError::Status(500).is_retryable());
    }

    #[test]
    fn one_failed_batch_keeps_the_others() {
        let server = FakeServer {
            fail_with: TransportError::Status(422),
            ..FakeServer::new(4)
        };
        server.fail_first.store(1, Ordering::SeqCst);
        let mut store = EmbeddingStore::new("fake");
        let c = ClientConfig {
            batch_size: 2,
            max_in_flight: 1,
            ..cfg()
        };
        let report = fetch_embeddings(&texts(6), &server, &mut store, &c);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].batch, 0);
        assert_eq!(store.len(), 4);
        assert!(!store.contains("text 0") && store.contains("text 5"));
    }

    #[test]
    fn duplicate_texts_requested_once() {
        let server = FakeServer::new(4);
        let mut store = EmbeddingStore::new("fake");
        let t = vec!["a b".to_string(), "a".into(), "a b".into(), "a".into()];
        let report = fetch_embeddings(&t, &server, &mut store, &cfg());
        assert_eq!(report.unique, 2);
        assert_eq!(server.sizes.lock().unwrap().as_slice(), &[2]);
    }
}
