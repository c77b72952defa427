//! Client for an external text-generation service.
//!
//! Wire contract: `POST <endpoint>` with
//! `{"prompt": "...", "temperature": 0.0, "max_tokens": N}` and a
//! `{"text": "..."}` response. Decoding is always greedy.

pub mod fixture;

pub use fixture::{FailureMode, FixtureServer, Responder};

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable consulted when no endpoint is configured.
pub const ENDPOINT_ENV: &str = "CEMRAG_ENDPOINT";

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("no generation endpoint configured (set --endpoint or {ENDPOINT_ENV})")]
    NoEndpoint,
    #[error("request {id:?} rejected with HTTP {status}: {body}")]
    Rejected { id: String, status: u16, body: String },
    #[error("request {id:?} timed out after {attempts} attempts")]
    Timeout { id: String, attempts: u32 },
    #[error("request {id:?} failed after {attempts} attempts: {last}")]
    Exhausted { id: String, attempts: u32, last: String },
    #[error("request {id:?}: malformed response: {reason}")]
    Malformed { id: String, reason: String },
    #[error("request {id:?}: service returned empty text")]
    EmptyText { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First retry delay; doubles on every further retry.
    pub backoff_ms: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            temperature: 0.0,
            max_tokens: 256,
            timeout_ms: 30_000,
            retries: 3,
            backoff_ms: 200,
        }
    }
}

impl GenerationConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            ..Self::default()
        }
    }

    /// Forces greedy decoding. Returns the warning when a non-zero
    /// temperature had been configured.
    pub fn enforce_greedy(&mut self) -> Option<String> {
        if self.temperature == 0.0 {
            return None;
        }
        let msg = format!(
            "temperature {} overridden to 0.0: generation uses greedy decoding",
            self.temperature
        );
        log::warn!("{msg}");
        self.temperature = 0.0;
        Some(msg)
    }
}

#[derive(Debug, Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedReport {
    pub id: String,
    pub text: String,
    #[serde(serialize_with = "ser_millis")]
    pub latency: Duration,
    pub attempt_count: u32,
}

fn ser_millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(d.as_millis() as u64)
}

/// Request body bytes for a prompt; identical inputs give identical bytes.
pub fn request_body(prompt: &str, config: &GenerationConfig) -> Vec<u8> {
    serde_json::to_vec(&GenerateRequest {
        prompt,
        temperature: 0.0,
        max_tokens: config.max_tokens,
    })
    .expect("request serialization cannot fail")
}

enum Attempt {
    Done(String),
    Retry { reason: String, timeout: bool },
    Fatal(GenerationError),
}

/// Blocking client; `Sync`, so one instance can serve many threads.
#[derive(Debug, Clone)]
pub struct GenerationClient {
    config: GenerationConfig,
    agent: ureq::Agent,
    warnings: Vec<String>,
}

impl GenerationClient {
    pub fn new(mut config: GenerationConfig) -> Result<Self, GenerationError> {
        if config.endpoint.is_empty() {
            config.endpoint = std::env::var(ENDPOINT_ENV).map_err(|_| GenerationError::NoEndpoint)?;
        }
        let warnings = config.enforce_greedy().into_iter().collect();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            warnings,
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    /// Configuration warnings raised at construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Sends one prompt, retrying transport failures and 5xx responses with
    /// exponential backoff. 4xx responses fail immediately.
    pub fn generate(&self, id: &str, prompt: &str) -> Result<GeneratedReport, GenerationError> {
        let body = request_body(prompt, &self.config);
        let start = Instant::now();
        let max_attempts = self.config.retries + 1;
        let mut last = String::new();
        let mut last_timeout = false;
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                let factor = 1u64 << (attempt - 2).min(16);
                thread::sleep(Duration::from_millis(self.config.backoff_ms.saturating_mul(factor)));
            }
            match self.attempt(id, &body) {
                Attempt::Done(text) => {
                    return Ok(GeneratedReport {
                        id: id.to_string(),
                        text,
                        latency: start.elapsed(),
                        attempt_count: attempt,
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { reason, timeout } => {
                    log::debug!("request {id:?} attempt {attempt} failed: {reason}");
                    last = reason;
                    last_timeout = timeout;
                }
            }
        }
        if last_timeout {
            Err(GenerationError::Timeout {
                id: id.to_string(),
                attempts: max_attempts,
            })
        } else {
            Err(GenerationError::Exhausted {
                id: id.to_string(),
                attempts: max_attempts,
                last,
            })
        }
    }

    fn attempt(&self, id: &str, body: &[u8]) -> Attempt {
        let result = self
            .agent
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .send(body);
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => {
                return Attempt::Retry {
                    reason: format!("timeout ({t})"),
                    timeout: true,
                }
            }
            Err(e @ (ureq::Error::BadUri(_) | ureq::Error::Http(_))) => {
                return Attempt::Fatal(GenerationError::Exhausted {
                    id: id.to_string(),
                    attempts: 1,
                    last: e.to_string(),
                })
            }
            Err(e) => {
                return Attempt::Retry {
                    reason: e.to_string(),
                    timeout: false,
                }
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    reason: format!("reading body: {e}"),
                    timeout: matches!(e, ureq::Error::Timeout(_)),
                }
            }
        };
        if (400..500).contains(&status) {
            return Attempt::Fatal(GenerationError::Rejected {
                id: id.to_string(),
                status,
                body: text,
            });
        }
        if !(200..300).contains(&status) {
            return Attempt::Retry {
                reason: format!("HTTP {status}"),
                timeout: false,
            };
        }
        match serde_json::from_str::<GenerateResponse>(&text) {
            Err(e) => Attempt::Fatal(GenerationError::Malformed {
                id: id.to_string(),
                reason: e.to_string(),
            }),
            Ok(r) if r.text.trim().is_empty() => Attempt::Fatal(GenerationError::EmptyText { id: id.to_string() }),
            Ok(r) => Attempt::Done(r.text),
        }
    }

    /// Generates for `(id, prompt)` pairs. With `parallelism > 1` up to that
    /// many requests are in flight; results always follow input order.
    pub fn generate_batch(
        &self,
        items: &[(String, String)],
        parallelism: usize,
    ) -> Vec<Result<GeneratedReport, GenerationError>> {
        if parallelism <= 1 {
            return items.iter().map(|(id, p)| self.generate(id, p)).collect();
        }
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(|(id, p)| self.generate(id, p)).collect()),
            Err(e) => {
                log::warn!("falling back to sequential generation: {e}");
                items.iter().map(|(id, p)| self.generate(id, p)).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_is_fixed_shape() {
        let cfg = GenerationConfig {
            max_tokens: 64,
            temperature: 0.7,
            ..GenerationConfig::default()
        };
        let body = String::from_utf8(request_body("hi \"x\"", &cfg)).unwrap();
        assert_eq!(body, r#"{"prompt":"hi \"x\"","temperature":0.0,"max_tokens":64}"#);
    }

    #[test]
    fn non_zero_temperature_is_overridden_with_warning() {
        let mut cfg = GenerationConfig {
            temperature: 0.7,
            ..GenerationConfig::new("http://127.0.0.1:9")
        };
        let w = cfg.enforce_greedy().unwrap();
        assert!(w.contains("0.7"));
        assert_eq!(cfg.temperature, 0.0);
        assert!(cfg.enforce_greedy().is_none());
    }
}
