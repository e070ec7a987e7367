//! JSON-over-HTTP plumbing shared by the remote generator and tagger.
//!
//! Connection failures, timeouts and `503` responses are retried with bounded
//! exponential backoff; any other non-2xx status is a protocol error.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            initial_backoff_ms: 200,
            max_backoff_ms: 5_000,
            timeout_ms: 120_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts are 1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("{0}")]
    Protocol(String),
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    base_url: String,
    pub retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(base_url: impl Into<String>, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(retry.timeout_ms)))
            .build()
            .into();
        JsonClient {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            retry,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// POSTs `body` to `path` and decodes the JSON response.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, RemoteError> {
        let url = format!("{}{}", self.base_url, path);
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.try_post(&url, body) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(msg)) => return Err(RemoteError::Protocol(msg)),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("{url}: attempt {attempt}/{attempts} failed: {msg}");
                    last = msg;
                    if attempt < attempts {
                        thread::sleep(self.retry.backoff(attempt));
                    }
                }
            }
        }
        Err(RemoteError::Unavailable {
            attempts,
            message: last,
        })
    }

    fn try_post<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R, Attempt> {
        let mut resp = match self.agent.post(url).send_json(body) {
            Ok(r) => r,
            Err(e @ (ureq::Error::BadUri(_) | ureq::Error::Http(_) | ureq::Error::Json(_))) => {
                return Err(Attempt::Fatal(e.to_string()))
            }
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 503 {
            return Err(Attempt::Retry("503 service unavailable".into()));
        }
        if !(200..300).contains(&status) {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {}", detail.trim())));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("invalid response body: {e}")))
    }
}
