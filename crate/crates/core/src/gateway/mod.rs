//! Uniform access to language and vision-language model providers.
//!
//! A [`ModelRequest`] names a [`PromptKind`] and carries ordered, labelled
//! context blocks. The [`Gateway`] renders the kind's template, sends it
//! through a [`ModelProvider`], checks the answer against the kind's output
//! shape and a caller-supplied validator, and re-prompts with the validation
//! error appended until the answer passes or the repair budget runs out.

mod http;
mod kind;
mod scripted;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use http::HttpProvider;
pub use kind::{OutputShape, PromptKind};
pub use scripted::{Responder, ScriptedProvider, UnavailableProvider};

use crate::canonical::digest_parts;
use crate::error::{Error, Result};

/// Token estimate used for every budget: `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ContextBlock {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRequest {
    pub kind: PromptKind,
    pub blocks: Vec<ContextBlock>,
    /// Object-store uris of media the provider should look at.
    pub attachments: Vec<String>,
}

impl ModelRequest {
    pub fn new(kind: PromptKind) -> Self {
        Self {
            kind,
            blocks: Vec::new(),
            attachments: Vec::new(),
        }
    }

    pub fn block(mut self, label: impl Into<String>, text: impl Into<String>) -> Self {
        self.blocks.push(ContextBlock {
            label: label.into(),
            text: text.into(),
        });
        self
    }

    pub fn attach(mut self, uri: impl Into<String>) -> Self {
        self.attachments.push(uri.into());
        self
    }

    pub fn block_text(&self, label: &str) -> Option<&str> {
        self.blocks.iter().find(|b| b.label == label).map(|b| b.text.as_str())
    }

    /// The template with its context slot filled.
    pub fn render(&self) -> String {
        let context: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("### {}\n{}", b.label, b.text.trim_end()))
            .collect();
        self.kind.template().replace("{{context}}", &context.join("\n\n"))
    }

    pub fn token_estimate(&self) -> u64 {
        estimate_tokens(&self.render())
    }

    /// Stable digest of the kind and the context blocks. Attachments are
    /// excluded; they are references whose content the blocks describe.
    pub fn fingerprint(&self) -> String {
        fingerprint(self.kind, &self.blocks)
    }
}

pub fn fingerprint(kind: PromptKind, blocks: &[ContextBlock]) -> String {
    let mut parts: Vec<&[u8]> = vec![kind.as_str().as_bytes()];
    for b in blocks {
        parts.push(b.label.as_bytes());
        parts.push(b.text.as_bytes());
    }
    digest_parts(parts)[..16].to_string()
}

/// What the provider sees for one call.
#[derive(Debug, Clone, Copy)]
pub struct ProviderRequest<'a> {
    pub kind: PromptKind,
    pub prompt: &'a str,
    pub attachments: &'a [String],
    pub blocks: &'a [ContextBlock],
    pub fingerprint: &'a str,
}

impl ProviderRequest<'_> {
    pub fn block(&self, label: &str) -> Option<&str> {
        self.blocks.iter().find(|b| b.label == label).map(|b| b.text.as_str())
    }
}

pub trait ModelProvider: Send + Sync {
    /// Identifier recorded in artifact metadata.
    fn model_id(&self) -> String;

    /// Largest number of concurrent requests the provider accepts.
    fn max_in_flight(&self) -> usize {
        4
    }

    /// Sends one rendered prompt. Transport failures are [`Error::Provider`].
    fn send(&self, request: &ProviderRequest<'_>) -> Result<String>;
}

/// One rejected answer, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Attempt {
    pub attempt: u32,
    pub fingerprint: String,
    pub raw: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResponse {
    pub kind: PromptKind,
    pub raw: String,
    /// Parsed value for JSON-shaped kinds.
    pub value: Option<Value>,
    /// Total attempts used, 1 when the first answer passed.
    pub attempts: u32,
}

/// A validator's verdict on one answer.
#[derive(Debug)]
pub enum Rejection {
    /// Re-prompt with this message appended.
    Retry(String),
    /// Stop immediately with this error.
    Fatal(Error),
}

impl From<Error> for Rejection {
    fn from(e: Error) -> Self {
        Rejection::Fatal(e)
    }
}

/// Journal entry for one provider call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ModelCall {
    pub kind: PromptKind,
    pub fingerprint: String,
    pub attempt: u32,
    pub latency_ms: u64,
    pub ok: bool,
}

pub type Journal = Arc<Mutex<Vec<ModelCall>>>;

struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Stateless front end over a provider. Cloning is cheap; clones share the
/// in-flight limit.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ModelProvider>,
    repair_attempts: u32,
    journal: Option<Journal>,
    in_flight: Arc<InFlight>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("model", &self.provider.model_id())
            .field("repair_attempts", &self.repair_attempts)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn ModelProvider>, repair_attempts: u32) -> Self {
        let limit = provider.max_in_flight().max(1);
        Self {
            provider,
            repair_attempts,
            journal: None,
            in_flight: Arc::new(InFlight {
                limit,
                used: Mutex::new(0),
                freed: Condvar::new(),
            }),
        }
    }

    /// A gateway that journals every call into `journal`.
    pub fn with_journal(&self, journal: Journal) -> Self {
        Self {
            journal: Some(journal),
            ..self.clone()
        }
    }

    pub fn model_id(&self) -> String {
        self.provider.model_id()
    }

    pub fn max_in_flight(&self) -> usize {
        self.in_flight.limit
    }

    pub fn repair_attempts(&self) -> u32 {
        self.repair_attempts
    }

    fn send(&self, request: &ModelRequest, attempt: u32) -> Result<String> {
        let prompt = request.render();
        let fingerprint = request.fingerprint();
        let started = Instant::now();
        let result = {
            let _slot = self.in_flight.acquire();
            self.provider.send(&ProviderRequest {
                kind: request.kind,
                prompt: &prompt,
                attachments: &request.attachments,
                blocks: &request.blocks,
                fingerprint: &fingerprint,
            })
        };
        if let Some(journal) = &self.journal {
            journal.lock().unwrap_or_else(|e| e.into_inner()).push(ModelCall {
                kind: request.kind,
                fingerprint,
                attempt,
                latency_ms: started.elapsed().as_millis() as u64,
                ok: result.is_ok(),
            });
        }
        result
    }

    /// Runs the request through the repair loop. `check` sees each answer
    /// that already matches the kind's output shape, with its attempt number.
    pub fn complete_with<T>(
        &self,
        request: &ModelRequest,
        mut check: impl FnMut(&ModelResponse, u32) -> Result<T, Rejection>,
    ) -> Result<(T, ModelResponse)> {
        let total = 1 + self.repair_attempts;
        let mut rejected = Vec::new();
        let mut current = request.clone();
        for attempt in 1..=total {
            let raw = self.send(&current, attempt)?;
            let verdict = parse_shape(request.kind, &raw).and_then(|value| {
                let response = ModelResponse {
                    kind: request.kind,
                    raw: raw.clone(),
                    value,
                    attempts: attempt,
                };
                check(&response, attempt).map(|t| (t, response))
            });
            match verdict {
                Ok(done) => return Ok(done),
                Err(Rejection::Fatal(e)) => return Err(e),
                Err(Rejection::Retry(message)) => {
                    tracing::debug!(kind = %request.kind, attempt, %message, "repairing model output");
                    rejected.push(Attempt {
                        attempt,
                        fingerprint: current.fingerprint(),
                        raw: raw.clone(),
                        error: Some(message.clone()),
                    });
                    current = request
                        .clone()
                        .block("previous_response", raw)
                        .block("validation_error", message);
                }
            }
        }
        Err(Error::StructuredOutput {
            kind: request.kind.to_string(),
            attempts: rejected,
        })
    }

    /// Shape check only.
    pub fn complete(&self, request: &ModelRequest) -> Result<ModelResponse> {
        self.complete_with(request, |_, _| Ok(())).map(|(_, r)| r)
    }

    /// Deserializes the answer as `T`, then lets `check` accept or reject it.
    pub fn complete_json<T, U>(
        &self,
        request: &ModelRequest,
        mut check: impl FnMut(T, u32) -> Result<U, Rejection>,
    ) -> Result<(U, ModelResponse)>
    where
        T: DeserializeOwned,
    {
        self.complete_with(request, |response, attempt| {
            let value = response.value.clone().unwrap_or(Value::Null);
            let typed: T = serde_json::from_value(value)
                .map_err(|e| Rejection::Retry(format!("schema mismatch: {e}")))?;
            check(typed, attempt)
        })
    }
}

fn parse_shape(kind: PromptKind, raw: &str) -> Result<Option<Value>, Rejection> {
    match kind.output_shape() {
        OutputShape::Text => {
            if raw.trim().is_empty() {
                Err(Rejection::Retry("empty response".into()))
            } else {
                Ok(None)
            }
        }
        OutputShape::JsonObject => {
            let body = extract_json(raw);
            match serde_json::from_str::<Value>(body) {
                Ok(v @ Value::Object(_)) => Ok(Some(v)),
                Ok(_) => Err(Rejection::Retry("expected a single JSON object".into())),
                Err(e) => {
                    let offset = match Error::parse(body.as_bytes(), &e) {
                        Error::Parse { offset, .. } => offset,
                        _ => 0,
                    };
                    Err(Rejection::Retry(format!("invalid JSON at byte {offset}: {e}")))
                }
            }
        }
    }
}

/// Strips code fences and surrounding prose from a JSON answer.
fn extract_json(raw: &str) -> &str {
    let trimmed = raw.trim();
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(a), Some(b)) if a < b => &trimmed[a..=b],
        _ => trimmed,
    }
}
