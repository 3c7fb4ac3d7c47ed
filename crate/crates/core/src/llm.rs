//! Text-generation gateway.
//!
//! Every prompt in the crate reaches a model through [`Gateway::complete`],
//! which validates sampling parameters, retries transport failures, and
//! appends one [`CompletionRecord`] per call to the audit log.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_MODEL_ID: &str = "Falcon-40b";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_TOP_P: f64 = 0.6;
pub const EXPLANATION_MAX_TOKENS: u32 = 256;
pub const ASPECT_MAX_TOKENS: u32 = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            max_tokens: EXPLANATION_MAX_TOKENS,
            stop_sequences: Vec::new(),
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::Contract(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::Contract(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::Contract("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Request body sent to a completion backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub text: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    /// Timeouts, connection resets, 5xx: worth retrying.
    #[error("transport: {0}")]
    Transport(String),
    /// The backend refused the request (4xx-equivalent).
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("no scripted response for prompt starting {0:?}")]
    NoScript(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("backend rejected request: {0}")]
    Rejected(String),
    #[error("no scripted response for prompt starting {0:?}")]
    NoScript(String),
    #[error("audit log: {0}")]
    Audit(String),
}

pub trait TextProvider: Send + Sync {
    fn generate(&self, request: &WireRequest) -> Result<String, ProviderError>;
}

impl<T: TextProvider + ?Sized> TextProvider for Arc<T> {
    fn generate(&self, request: &WireRequest) -> Result<String, ProviderError> {
        (**self).generate(request)
    }
}

/// One audited gateway call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub prompt: String,
    pub params: GenerationParams,
    pub output: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    fn delay_before(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

enum AuditSink {
    Memory(Vec<CompletionRecord>),
    File(BufWriter<File>),
}

/// Append-only JSON-lines log of completion records.
pub struct AuditLog {
    sink: Mutex<AuditSink>,
    count: AtomicUsize,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self {
            sink: Mutex::new(AuditSink::Memory(Vec::new())),
            count: AtomicUsize::new(0),
        }
    }

    pub fn append_to(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            sink: Mutex::new(AuditSink::File(BufWriter::new(file))),
            count: AtomicUsize::new(0),
        })
    }

    fn append(&self, record: &CompletionRecord) -> Result<(), GatewayError> {
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        match &mut *sink {
            AuditSink::Memory(v) => v.push(record.clone()),
            AuditSink::File(w) => {
                let line = serde_json::to_string(record)
                    .map_err(|e| GatewayError::Audit(e.to_string()))?;
                writeln!(w, "{line}")
                    .and_then(|_| w.flush())
                    .map_err(|e| GatewayError::Audit(e.to_string()))?;
            }
        }
        self.count.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    /// Number of records appended through this handle.
    pub fn len(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records held in memory; empty for file-backed logs.
    pub fn records(&self) -> Vec<CompletionRecord> {
        match &*self.sink.lock().unwrap_or_else(|p| p.into_inner()) {
            AuditSink::Memory(v) => v.clone(),
            AuditSink::File(_) => Vec::new(),
        }
    }
}

/// The single route from prompts to a text backend.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn TextProvider>,
    model_id: String,
    retry: RetryPolicy,
    audit: Arc<AuditLog>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn TextProvider>, model_id: impl Into<String>) -> Self {
        Self {
            provider,
            model_id: model_id.into(),
            retry: RetryPolicy::default(),
            audit: Arc::new(AuditLog::in_memory()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = audit;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    /// Number of `complete` calls made through this gateway's audit log.
    pub fn calls(&self) -> usize {
        self.audit.len()
    }

    pub fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<CompletionRecord, GatewayError> {
        let started = Instant::now();
        let timestamp = Utc::now();
        let result = self.dispatch(prompt, params);
        let record = CompletionRecord {
            prompt: prompt.to_string(),
            params: params.clone(),
            output: result.as_ref().ok().cloned().unwrap_or_default(),
            model_id: self.model_id.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            timestamp,
            error: result.as_ref().err().map(ToString::to_string),
        };
        self.audit.append(&record)?;
        result.map(|_| record)
    }

    fn dispatch(&self, prompt: &str, params: &GenerationParams) -> Result<String, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::Contract("prompt is empty".into()));
        }
        params.validate()?;
        let request = WireRequest {
            model_id: self.model_id.clone(),
            prompt: prompt.to_string(),
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
            stop: params.stop_sequences.clone(),
        };
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.retry.delay_before(attempt - 1));
            }
            match self.provider.generate(&request) {
                Ok(text) => return Ok(text),
                Err(ProviderError::Transport(msg)) => {
                    tracing::warn!(attempt, %msg, "transport failure");
                    last = msg;
                }
                Err(ProviderError::Rejected(msg)) => return Err(GatewayError::Rejected(msg)),
                Err(ProviderError::NoScript(head)) => return Err(GatewayError::NoScript(head)),
            }
        }
        Err(GatewayError::Transport {
            message: last,
            attempts,
        })
    }
}

/// Hex SHA-256 of a prompt, usable as an exact scripted-provider key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// How a scripted rule recognizes a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMatcher {
    Contains(String),
    /// Every needle must occur.
    ContainsAll(Vec<String>),
    Exact(String),
    Hash(String),
}

impl PromptMatcher {
    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Self::Contains(needle) => prompt.contains(needle.as_str()),
            Self::ContainsAll(needles) => needles.iter().all(|n| prompt.contains(n.as_str())),
            Self::Exact(text) => prompt == text,
            Self::Hash(h) => prompt_hash(prompt).eq_ignore_ascii_case(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(flatten)]
    pub matcher: PromptMatcher,
    pub response: String,
}

/// Deterministic backend for offline runs; the first matching rule in
/// declaration order answers.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    rules: Vec<ScriptRule>,
    calls: Arc<AtomicUsize>,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Self {
            rules,
            calls: Arc::default(),
        }
    }

    pub fn when_contains(mut self, needle: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(ScriptRule {
            matcher: PromptMatcher::Contains(needle.into()),
            response: response.into(),
        });
        self
    }

    pub fn when_exact(mut self, prompt: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(ScriptRule {
            matcher: PromptMatcher::Exact(prompt.into()),
            response: response.into(),
        });
        self
    }

    pub fn when_hash(mut self, hash: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(ScriptRule {
            matcher: PromptMatcher::Hash(hash.into()),
            response: response.into(),
        });
        self
    }

    /// Loads rules from a JSON list such as
    /// `[{"contains": "Step 3", "response": "..."}]`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn make_scripted_provider(script: Vec<ScriptRule>) -> ScriptedProvider {
    ScriptedProvider::new(script)
}

impl TextProvider for ScriptedProvider {
    fn generate(&self, request: &WireRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.rules
            .iter()
            .find(|r| r.matcher.matches(&request.prompt))
            .map(|r| r.response.clone())
            .ok_or_else(|| ProviderError::NoScript(request.prompt.chars().take(80).collect()))
    }
}

/// Completion backend over HTTP: `POST` a [`WireRequest`], receive a
/// [`WireResponse`].
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Contract(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }
}

impl TextProvider for HttpProvider {
    fn generate(&self, request: &WireRequest) -> Result<String, ProviderError> {
        let mut req = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_client_error() && status.as_u16() != 408 && status.as_u16() != 429 {
            let body = resp.text().unwrap_or_default();
            return Err(ProviderError::Rejected(format!("HTTP {status}: {body}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        resp.json::<WireResponse>()
            .map(|r| r.text)
            .map_err(|e| ProviderError::Rejected(format!("malformed response: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flaky {
        failures: AtomicUsize,
        kind: ProviderError,
    }

    impl TextProvider for Flaky {
        fn generate(&self, _: &WireRequest) -> Result<String, ProviderError> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                Err(self.kind.clone())
            } else {
                Ok("ok".into())
            }
        }
    }

    fn gateway(p: impl TextProvider + 'static) -> Gateway {
        Gateway::new(Arc::new(p), DEFAULT_MODEL_ID).with_retry(RetryPolicy::immediate(3))
    }

    #[test]
    fn defaults_match_sampling_setup() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 0.7);
        assert_eq!(p.top_p, 0.6);
        assert_eq!(p.max_tokens, 256);
    }

    #[test]
    fn scripted_returns_verbatim() {
        let text = "  1. family drama \n";
        let g = gateway(ScriptedProvider::default().when_hash(prompt_hash("hello"), text));
        let rec = g.complete("hello", &GenerationParams::default()).unwrap();
        assert_eq!(rec.output, text);
        assert_eq!(rec.model_id, "Falcon-40b");
    }

    #[test]
    fn negative_temperature_never_reaches_backend() {
        let p = Arc::new(ScriptedProvider::default().when_contains("", "x"));
        let g = Gateway::new(p.clone(), "m");
        let params = GenerationParams {
            temperature: -1.0,
            ..Default::default()
        };
        assert!(matches!(g.complete("hi", &params), Err(GatewayError::Contract(_))));
        assert_eq!(p.calls(), 0);
    }

    #[test]
    fn repeat_calls_identical_apart_from_timing() {
        let g = gateway(ScriptedProvider::default().when_contains("a", "b"));
        let mut r1 = g.complete("a", &GenerationParams::default()).unwrap();
        let mut r2 = g.complete("a", &GenerationParams::default()).unwrap();
        r1.latency_ms = 0;
        r2.latency_ms = 0;
        r2.timestamp = r1.timestamp;
        assert_eq!(r1, r2);
    }

    #[test]
    fn first_matching_rule_wins() {
        let g = gateway(
            ScriptedProvider::default()
                .when_contains("List the key aspects", "1. family drama")
                .when_contains("List", "other"),
        );
        let rec = g
            .complete("Please List the key aspects now", &GenerationParams::default())
            .unwrap();
        assert_eq!(rec.output, "1. family drama");
    }

    #[test]
    fn empty_script_names_prompt_head() {
        let g = gateway(ScriptedProvider::default());
        let prompt = "x".repeat(200);
        match g.complete(&prompt, &GenerationParams::default()) {
            Err(GatewayError::NoScript(head)) => assert_eq!(head.len(), 80),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transport_failures_retried_then_succeed() {
        let g = gateway(Flaky {
            failures: AtomicUsize::new(2),
            kind: ProviderError::Transport("timeout".into()),
        });
        assert_eq!(g.complete("p", &GenerationParams::default()).unwrap().output, "ok");
    }

    #[test]
    fn transport_failures_exhaust_attempts() {
        let g = gateway(Flaky {
            failures: AtomicUsize::new(5),
            kind: ProviderError::Transport("timeout".into()),
        });
        assert_eq!(
            g.complete("p", &GenerationParams::default()).unwrap_err(),
            GatewayError::Transport {
                message: "timeout".into(),
                attempts: 3
            }
        );
    }

    #[test]
    fn rejection_not_retried() {
        let flaky = Arc::new(Flaky {
            failures: AtomicUsize::new(1),
            kind: ProviderError::Rejected("400".into()),
        });
        let g = Gateway::new(flaky.clone(), "m").with_retry(RetryPolicy::immediate(3));
        assert!(matches!(
            g.complete("p", &GenerationParams::default()),
            Err(GatewayError::Rejected(_))
        ));
        assert_eq!(flaky.failures.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn backoff_doubles() {
        let r = RetryPolicy::default();
        assert_eq!(r.delay_before(1), Duration::from_millis(500));
        assert_eq!(r.delay_before(2), Duration::from_millis(1000));
    }

    #[test]
    fn audit_counts_every_call() {
        let g = gateway(ScriptedProvider::default().when_contains("a", "b"));
        let _ = g.complete("a", &GenerationParams::default());
        let _ = g.complete("zzz", &GenerationParams::default());
        assert_eq!(g.calls(), 2);
        let recs = g.audit().records();
        assert!(recs[0].error.is_none());
        assert!(recs[1].error.is_some());
    }

    #[test]
    fn file_audit_log_one_line_per_call() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        let audit = Arc::new(AuditLog::append_to(&path).unwrap());
        let g = gateway(ScriptedProvider::default().when_contains("a", "b")).with_audit(audit);
        for _ in 0..3 {
            g.complete("a", &GenerationParams::default()).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let rec: CompletionRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(rec.output, "b");
    }

    #[test]
    fn script_json_format() {
        let p = ScriptedProvider::from_json(
            r#"[{"contains_all": ["Godfather", "Step 3"], "response": "both"},
                {"contains": "Step 3", "response": "final"}, {"exact": "hi", "response": "yo"}]"#,
        )
        .unwrap();
        let req = |prompt: &str| WireRequest {
            model_id: "m".into(),
            prompt: prompt.into(),
            temperature: 0.7,
            top_p: 0.6,
            max_tokens: 10,
            stop: vec![],
        };
        assert_eq!(p.generate(&req("do Step 3")).unwrap(), "final");
        assert_eq!(p.generate(&req("The Godfather, Step 3")).unwrap(), "both");
        assert_eq!(p.generate(&req("hi")).unwrap(), "yo");
    }
}
