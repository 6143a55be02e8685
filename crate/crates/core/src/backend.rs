//! The one-model-call contract. Every agent call in the pipeline is a
//! [`ChatRequest`] handed to a [`Backend`]; the scripted implementation here
//! replays canned responses so the full loop runs deterministically offline.
//! The remote HTTP implementation lives in the std companion crate.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Which agent a request belongs to. Scripted matchers key on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Explorer,
    Verifier,
    Refiner,
    Transcriber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Temperature-like scalar in `[0, 2]`.
    pub temperature: f64,
    /// Positive output budget, in the backend's accounting units.
    pub max_output_len: u32,
}

/// One model call: a system prompt shared by all agents plus the
/// role-specific user prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub sampling: SamplingParams,
    pub role_tag: RoleTag,
    /// 0 for the first ask of a slot, 1 for the single re-ask of an
    /// inconclusive review.
    pub attempt: u32,
}

impl ChatRequest {
    /// Checks the request invariants: non-empty prompts, temperature in
    /// range, positive output budget.
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.system_prompt.is_empty() || self.user_prompt.is_empty() {
            return Err(BackendError::InvalidRequest {
                detail: String::from("system_prompt and user_prompt must be non-empty"),
            });
        }
        if !(0.0..=2.0).contains(&self.sampling.temperature) {
            return Err(BackendError::InvalidRequest {
                detail: String::from("temperature must lie in [0, 2]"),
            });
        }
        if self.sampling.max_output_len == 0 {
            return Err(BackendError::InvalidRequest {
                detail: String::from("max_output_len must be positive"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    #[default]
    Complete,
    LengthTruncated,
    Refused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_units: u64,
    pub output_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
}

impl ChatResponse {
    /// Complete response with zeroed usage, the common case in fixtures.
    pub fn complete(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: FinishReason::Complete,
            usage: Usage::default(),
        }
    }
}

/// Accepts a request by role, optionally narrowed to user prompts containing
/// a substring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepMatcher {
    pub role_tag: RoleTag,
    pub user_prompt_contains: Option<String>,
}

impl StepMatcher {
    pub fn role(role_tag: RoleTag) -> Self {
        Self {
            role_tag,
            user_prompt_contains: None,
        }
    }

    pub fn role_containing(role_tag: RoleTag, needle: impl Into<String>) -> Self {
        Self {
            role_tag,
            user_prompt_contains: Some(needle.into()),
        }
    }

    pub fn accepts(&self, request: &ChatRequest) -> bool {
        self.role_tag == request.role_tag
            && self
                .user_prompt_contains
                .as_deref()
                .is_none_or(|needle| request.user_prompt.contains(needle))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub matcher: StepMatcher,
    pub response: ChatResponse,
}

impl ScriptStep {
    pub fn new(matcher: StepMatcher, response: ChatResponse) -> Self {
        Self { matcher, response }
    }
}

/// An ordered list of canned responses. Replaying the same script against
/// the same request sequence yields byte-identical responses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    steps: Vec<ScriptStep>,
    cursor: usize,
}

impl Script {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        Self { steps, cursor: 0 }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.steps.len() - self.cursor
    }

    /// Rewinds to the first step for replay.
    pub fn reset(&mut self) {
        self.cursor = 0;
    }

    /// Serves the first remaining step whose matcher accepts the request and
    /// advances the cursor past it. Deterministic; no match (or an empty
    /// remainder) is a fixture bug surfaced as [`BackendError::ScriptExhausted`].
    pub fn next_response(&mut self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let found = self.steps[self.cursor..]
            .iter()
            .position(|step| step.matcher.accepts(request));
        match found {
            Some(offset) => {
                let idx = self.cursor + offset;
                self.cursor = idx + 1;
                Ok(self.steps[idx].response.clone())
            }
            None => Err(BackendError::ScriptExhausted {
                role: request.role_tag,
                cursor: self.cursor,
            }),
        }
    }
}

/// One model call. The remote implementation retries transient transport
/// failures (1 s initial backoff, factor 2, at most 5 attempts) and never
/// retries credential rejections; the scripted implementation consumes
/// exactly one matching step per call.
///
/// Implementations take `&mut self`; callers that fan out concurrently wrap
/// the backend in their own synchronization. The orchestrator issues calls
/// sequentially, which its contract explicitly permits.
pub trait Backend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// Deterministic backend replaying a [`Script`].
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }
}

impl Backend for ScriptedBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let mut response = self.script.next_response(request)?;
        // The backend's accounting owns the truncation invariant: a
        // truncated response used exactly the requested output budget.
        if response.finish_reason == FinishReason::LengthTruncated {
            response.usage.output_units = u64::from(request.sampling.max_output_len);
        }
        Ok(response)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Transport failed after the retry budget was exhausted.
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    /// Credentials rejected; never retried.
    #[error("authentication failure: {detail}")]
    Auth { detail: String },
    /// The scripted backend has no remaining step matching the request.
    #[error("script exhausted at cursor {cursor}: no step matches a {role:?} request")]
    ScriptExhausted { role: RoleTag, cursor: usize },
    #[error("invalid request: {detail}")]
    InvalidRequest { detail: String },
}
