//! Completions-style HTTP backend with bounded retries, a concurrency cap and
//! a request-rate ceiling.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionParams};
use crate::prompting::Prompt;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "PEX_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    /// Full URL of the completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    /// Retries after the first attempt for transport errors, 429 and 5xx.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub max_concurrent: usize,
    /// Minimum spacing between request starts; zero disables the ceiling.
    pub min_interval: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1/completions".to_string(),
            model: "davinci-002".to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            max_concurrent: 4,
            min_interval: Duration::ZERO,
        }
    }
}

impl LiveConfig {
    /// Sets the rate ceiling in requests per minute; zero removes it.
    pub fn with_requests_per_minute(mut self, rpm: u32) -> Self {
        self.min_interval = if rpm == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(60.0 / f64::from(rpm))
        };
        self
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.min(20));
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    text: String,
}

/// Cuts `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stop: &[String]) -> &'a str {
    let cut = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            permits: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore lock");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore lock") += 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(BackendError),
    Fatal(BackendError),
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    agent: ureq::Agent,
    slots: Semaphore,
    next_start: Mutex<Instant>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig, api_key: impl Into<String>) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build();
        LiveBackend {
            slots: Semaphore::new(config.max_concurrent),
            agent: ureq::Agent::new_with_config(agent_config),
            api_key: api_key.into(),
            next_start: Mutex::new(Instant::now()),
            config,
        }
    }

    /// Reads the bearer token from [`API_KEY_ENV`].
    pub fn from_env(config: LiveConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(BackendError::MissingCredentials(API_KEY_ENV))?;
        Ok(Self::new(config, key))
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn wait_for_rate_slot(&self) {
        if self.config.min_interval.is_zero() {
            return;
        }
        let start = {
            let mut next = self.next_start.lock().expect("rate lock");
            let start = (*next).max(Instant::now());
            *next = start + self.config.min_interval;
            start
        };
        let now = Instant::now();
        if start > now {
            thread::sleep(start - now);
        }
    }

    fn attempt(&self, prompt: &Prompt, params: &CompletionParams) -> Attempt {
        self.wait_for_rate_slot();
        let request = CompletionRequest {
            model: &self.config.model,
            prompt: &prompt.text,
            temperature: params.temperature,
            top_p: params.nucleus,
            max_tokens: params.max_tokens,
            stop: &params.stop,
        };
        let response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&request);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            429 => return Attempt::Retry(BackendError::RateLimited { attempts: 0 }),
            500..=599 => return Attempt::Retry(BackendError::Status(status)),
            _ => return Attempt::Fatal(BackendError::Status(status)),
        }
        match response.body_mut().read_json::<CompletionResponse>() {
            Ok(body) => match body.choices.into_iter().next() {
                Some(choice) => Attempt::Done(truncate_at_stop(&choice.text, &params.stop).to_string()),
                None => Attempt::Fatal(BackendError::BadResponse("no choices in response".into())),
            },
            Err(e) => Attempt::Fatal(BackendError::BadResponse(e.to_string())),
        }
    }
}

impl Backend for LiveBackend {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, BackendError> {
        if prompt.text.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        params.validate()?;
        let _permit = self.slots.acquire();
        let mut retry = 0;
        loop {
            let err = match self.attempt(prompt, params) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => e,
            };
            if retry >= self.config.max_retries {
                return Err(match err {
                    BackendError::RateLimited { .. } => BackendError::RateLimited { attempts: retry + 1 },
                    other => other,
                });
            }
            log::warn!("completion attempt {} failed: {err}; retrying", retry + 1);
            thread::sleep(self.config.backoff(retry));
            retry += 1;
        }
    }
}
