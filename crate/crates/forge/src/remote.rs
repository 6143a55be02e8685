//! Remote chat-completion backend.
//!
//! The wire contract is the ubiquitous chat-completions shape: the request
//! body carries the model name, a two-message list (system, user), the
//! temperature, and the output budget; the response carries the message
//! content, a finish reason, and usage counters. Any endpoint speaking that
//! contract plugs in via the config file; the credential comes exclusively
//! from the `AIM_API_KEY` environment variable.
//!
//! Transient transport failures (connect errors, timeouts, 408/429/5xx)
//! retry with exponential backoff: 1 s initial, factor 2, at most 5
//! attempts. Credential rejections (401/403) are never retried.

use std::thread::sleep;
use std::time::Duration;

use aim_forge_core::backend::{
    Backend, BackendError, ChatRequest, ChatResponse, FinishReason, Usage,
};
use serde::{Deserialize, Serialize};

/// Environment variable holding the API credential.
pub const ENV_API_KEY: &str = "AIM_API_KEY";

const MAX_ATTEMPTS: u32 = 5;
const DEFAULT_INITIAL_BACKOFF: Duration = Duration::from_secs(1);
const REQUEST_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireContent,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireContent {
    #[serde(default)]
    content: String,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

pub struct RemoteBackend {
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
    initial_backoff: Duration,
}

impl RemoteBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 0,
                detail: format!("cannot build http client: {e}"),
            })?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            client,
            initial_backoff: DEFAULT_INITIAL_BACKOFF,
        })
    }

    /// Reads the credential from [`ENV_API_KEY`].
    pub fn from_env(
        endpoint: impl Into<String>,
        model: impl Into<String>,
    ) -> Result<Self, BackendError> {
        let api_key = std::env::var(ENV_API_KEY).map_err(|_| BackendError::Auth {
            detail: format!("{ENV_API_KEY} is not set"),
        })?;
        Self::new(endpoint, model, api_key)
    }

    /// Overrides the initial backoff delay. The attempt cap stays at 5;
    /// production code keeps the 1 s default.
    pub fn with_initial_backoff(mut self, initial: Duration) -> Self {
        self.initial_backoff = initial;
        self
    }

    fn parse_success(body: &str, attempts: u32) -> Result<ChatResponse, BackendError> {
        let wire: WireResponse =
            serde_json::from_str(body).map_err(|e| BackendError::Transport {
                attempts,
                detail: format!("unparseable response body: {e}"),
            })?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or(BackendError::Transport {
                attempts,
                detail: "response carried no choices".to_string(),
            })?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::LengthTruncated,
            Some("content_filter") | Some("refusal") => FinishReason::Refused,
            _ => FinishReason::Complete,
        };
        let usage = wire.usage.unwrap_or_default();
        Ok(ChatResponse {
            text: choice.message.content,
            finish_reason,
            usage: Usage {
                input_units: usage.prompt_tokens,
                output_units: usage.completion_tokens,
            },
        })
    }
}

fn transient_status(status: u16) -> bool {
    matches!(status, 408 | 429) || (500..600).contains(&status)
}

impl Backend for RemoteBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let body = WireRequest {
            model: &self.model,
            messages: vec![
                WireMessage {
                    role: "system",
                    content: &request.system_prompt,
                },
                WireMessage {
                    role: "user",
                    content: &request.user_prompt,
                },
            ],
            temperature: request.sampling.temperature,
            max_tokens: request.sampling.max_output_len,
        };
        let mut backoff = self.initial_backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome = self
                .client
                .post(&self.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            let retryable_detail = match outcome {
                Ok(response) => {
                    let status = response.status().as_u16();
                    if (200..300).contains(&status) {
                        let text = response.text().map_err(|e| BackendError::Transport {
                            attempts,
                            detail: format!("failed reading response body: {e}"),
                        })?;
                        return Self::parse_success(&text, attempts);
                    }
                    if status == 401 || status == 403 {
                        return Err(BackendError::Auth {
                            detail: format!("endpoint returned status {status}"),
                        });
                    }
                    if !transient_status(status) {
                        return Err(BackendError::Transport {
                            attempts,
                            detail: format!("endpoint returned status {status}"),
                        });
                    }
                    format!("transient status {status}")
                }
                Err(e) => format!("transport error: {e}"),
            };
            if attempts >= MAX_ATTEMPTS {
                return Err(BackendError::Transport {
                    attempts,
                    detail: retryable_detail,
                });
            }
            sleep(backoff);
            backoff *= 2;
        }
    }
}
