//! HTTP client for external rewriter and generator services.
//!
//! Protocol: `POST {base}/rewrite` with `{"utterances": [..]}` answers
//! `{"rewrite": ".."}`; `POST {base}/generate` with
//! `{"question": "..", "context": ".."}` answers `{"answer": ".."}`.
//! Failed attempts are retried after a fixed backoff.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use convqa_core::generate::GenerateService;
use convqa_core::rewrite::RewriteService;
use convqa_core::ServiceError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable overriding the configured base URL.
pub const MODEL_URL_ENV: &str = "CONVQA_MODEL_URL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub url: String,
    #[serde(default = "Endpoint::default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "Endpoint::default_retries")]
    pub retries: u32,
    #[serde(default = "Endpoint::default_backoff_ms")]
    pub backoff_ms: u64,
    /// Maximum concurrent requests through one client.
    #[serde(default = "Endpoint::default_concurrency")]
    pub concurrency: usize,
}

impl Endpoint {
    fn default_timeout_ms() -> u64 {
        30_000
    }
    fn default_retries() -> u32 {
        2
    }
    fn default_backoff_ms() -> u64 {
        500
    }
    fn default_concurrency() -> usize {
        4
    }

    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout_ms: Self::default_timeout_ms(),
            retries: Self::default_retries(),
            backoff_ms: Self::default_backoff_ms(),
            concurrency: Self::default_concurrency(),
        }
    }
}

/// Why one attempt failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttemptError {
    #[error("timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("transport: {0}")]
    Transport(String),
}

/// A request that failed on every attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path} failed after {attempts} attempt(s): {last}")]
pub struct ClientError {
    pub path: &'static str,
    pub attempts: u32,
    pub last: AttemptError,
}

impl From<ClientError> for ServiceError {
    fn from(e: ClientError) -> Self {
        ServiceError {
            attempts: e.attempts,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct RewriteRequest<'a> {
    utterances: &'a [String],
}

#[derive(Deserialize)]
struct RewriteResponse {
    rewrite: String,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    question: &'a str,
    context: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    answer: String,
}

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct ModelClient {
    endpoint: Endpoint,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl ModelClient {
    pub fn new(endpoint: Endpoint) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(endpoint.timeout_ms.max(1)))
            .build();
        let limiter = Limiter {
            free: Mutex::new(endpoint.concurrency.max(1)),
            cv: Condvar::new(),
        };
        Self {
            endpoint,
            agent,
            limiter,
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Request body for `/rewrite`.
    pub fn rewrite_body(utterances: &[String]) -> String {
        serde_json::to_string(&RewriteRequest { utterances }).expect("serializable")
    }

    /// Request body for `/generate`.
    pub fn generate_body(question: &str, context: &str) -> String {
        serde_json::to_string(&GenerateRequest { question, context }).expect("serializable")
    }

    pub fn call_rewrite(&self, utterances: &[String]) -> Result<String, ClientError> {
        let r: RewriteResponse = self.post("/rewrite", &Self::rewrite_body(utterances))?;
        Ok(r.rewrite)
    }

    pub fn call_generate(&self, question: &str, context: &str) -> Result<String, ClientError> {
        let r: GenerateResponse = self.post("/generate", &Self::generate_body(question, context))?;
        Ok(r.answer)
    }

    fn post<T: DeserializeOwned>(&self, path: &'static str, body: &str) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.endpoint.url.trim_end_matches('/'));
        let attempts = 1 + self.endpoint.retries;
        let mut last = AttemptError::Transport("no attempt made".into());
        for attempt in 1..=attempts {
            if attempt > 1 {
                thread::sleep(Duration::from_millis(self.endpoint.backoff_ms));
            }
            let _permit = self.limiter.acquire();
            match self.attempt(&url, body) {
                Ok(v) => return Ok(v),
                Err(e) => last = e,
            }
        }
        Err(ClientError {
            path,
            attempts,
            last,
        })
    }

    fn attempt<T: DeserializeOwned>(&self, url: &str, body: &str) -> Result<T, AttemptError> {
        let resp = self
            .agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(body)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => AttemptError::Status(code),
                ureq::Error::Transport(t) => classify_transport(&t),
            })?;
        let text = resp.into_string().map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut || e.kind() == std::io::ErrorKind::WouldBlock {
                AttemptError::Timeout
            } else {
                AttemptError::Transport(e.to_string())
            }
        })?;
        serde_json::from_str(&text).map_err(|e| AttemptError::Malformed(e.to_string()))
    }
}

fn classify_transport(t: &ureq::Transport) -> AttemptError {
    let msg = t.to_string();
    let timed_out = std::error::Error::source(t)
        .and_then(|s| s.downcast_ref::<std::io::Error>())
        .is_some_and(|io| matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock))
        || msg.contains("timed out");
    if timed_out {
        AttemptError::Timeout
    } else {
        AttemptError::Transport(msg)
    }
}

impl RewriteService for ModelClient {
    fn rewrite(&self, utterances: &[String]) -> Result<String, ServiceError> {
        self.call_rewrite(utterances).map_err(Into::into)
    }
}

impl GenerateService for ModelClient {
    fn generate(&self, question: &str, context: &str) -> Result<String, ServiceError> {
        self.call_generate(question, context).map_err(Into::into)
    }
}
