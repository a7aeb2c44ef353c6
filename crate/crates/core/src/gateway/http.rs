//! Adapter for OpenAI-compatible chat-completions endpoints.

use std::time::Duration;

use serde_json::{json, Value};

use super::{ModelProvider, ProviderRequest};
use crate::error::{Error, Result};

pub const ENV_BASE_URL: &str = "PROVIDER_BASE_URL";
pub const ENV_API_KEY: &str = "PROVIDER_API_KEY";
pub const ENV_MODEL: &str = "PROVIDER_MODEL";

pub struct HttpProvider {
    base_url: String,
    api_key: Option<String>,
    model: String,
    max_in_flight: usize,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            model: model.into(),
            max_in_flight: 4,
            agent,
        }
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    /// Reads the base URL, credential and model name from the environment.
    /// Returns `None` when no base URL is configured.
    pub fn from_env() -> Option<Self> {
        let base = std::env::var(ENV_BASE_URL).ok().filter(|s| !s.is_empty())?;
        let key = std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into());
        Some(Self::new(base, key, model))
    }

    fn body(&self, request: &ProviderRequest<'_>) -> Value {
        let mut content = request.prompt.to_string();
        if !request.attachments.is_empty() {
            content.push_str("\n\nAttached media:\n");
            for uri in request.attachments {
                content.push_str(&format!("- {uri}\n"));
            }
        }
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        })
    }
}

impl ModelProvider for HttpProvider {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    fn send(&self, request: &ProviderRequest<'_>) -> Result<String> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(self.body(request))
            .map_err(|e| Error::Provider(format!("{url}: {e}")))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Provider(format!("{url}: {e}")))?;
        if !status.is_success() {
            return Err(Error::Provider(format!("{url}: HTTP {status}: {text}")));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Error::Provider(format!("{url}: bad response: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Provider(format!("{url}: response has no message content")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ModelRequest, PromptKind};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    /// Serves one canned HTTP response and returns the request body it saw.
    fn serve_once(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let reply = format!(
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let mut stream = stream;
            stream.write_all(reply.as_bytes()).unwrap();
            String::from_utf8(buf).unwrap()
        });
        (format!("http://{addr}/v1"), handle)
    }

    #[test]
    fn sends_chat_completion_and_reads_content() {
        let (base, server) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"{\"needs_visual\": false}"}}]}"#,
        );
        let provider = HttpProvider::new(base, Some("k".into()), "m1");
        let g = Gateway::new(Arc::new(provider), 0);
        let req = ModelRequest::new(PromptKind::QaRoute).block("question", "Why?").attach("p/media/x.mp4");
        let r = g.complete(&req).unwrap();
        assert_eq!(r.value.unwrap()["needs_visual"], false);
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["model"], "m1");
        assert!(sent["messages"][0]["content"].as_str().unwrap().contains("- p/media/x.mp4"));
    }

    #[test]
    fn http_error_is_provider_error() {
        let (base, server) = serve_once("503 Service Unavailable", "{}");
        let provider = HttpProvider::new(base, None, "m1");
        let g = Gateway::new(Arc::new(provider), 2);
        let err = g.complete(&ModelRequest::new(PromptKind::QaRoute)).unwrap_err();
        assert!(matches!(err, Error::Provider(m) if m.contains("503")));
        server.join().unwrap();
    }
}
