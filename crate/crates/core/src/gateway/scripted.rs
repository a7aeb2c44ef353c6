//! Deterministic providers for tests, demos and offline runs.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use super::{ModelProvider, PromptKind, ProviderRequest};
use crate::error::{Error, Result};

/// Computes an answer from the request alone, or `None` to decline.
pub type Responder = Arc<dyn Fn(&ProviderRequest<'_>) -> Option<String> + Send + Sync>;

#[derive(Debug, Clone)]
enum Script {
    Text(String),
    Fail(String),
}

/// Scripted mock provider.
///
/// Lookup order for each call: an exact script for `(kind, fingerprint)`
/// (loaded from a fixtures directory or inserted), then the next queued
/// script for the kind, then the responder. Anything else is a provider
/// error naming the kind and fingerprint, so a missing fixture is obvious.
pub struct ScriptedProvider {
    model: String,
    exact: Mutex<HashMap<(PromptKind, String), String>>,
    queues: Mutex<HashMap<PromptKind, VecDeque<Script>>>,
    responder: Option<Responder>,
    log: Mutex<Vec<(PromptKind, String, String)>>,
}

impl Default for ScriptedProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self {
            model: "scripted-mock".into(),
            exact: Mutex::default(),
            queues: Mutex::default(),
            responder: None,
            log: Mutex::default(),
        }
    }

    pub fn with_responder(responder: Responder) -> Self {
        Self {
            responder: Some(responder),
            ..Self::new()
        }
    }

    pub fn named(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// Queues an answer for the next call of `kind`.
    pub fn push(&self, kind: PromptKind, text: impl Into<String>) {
        self.queue(kind, Script::Text(text.into()));
    }

    /// Queues a transport failure for the next call of `kind`.
    pub fn push_failure(&self, kind: PromptKind, message: impl Into<String>) {
        self.queue(kind, Script::Fail(message.into()));
    }

    fn queue(&self, kind: PromptKind, script: Script) {
        self.queues
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(kind)
            .or_default()
            .push_back(script);
    }

    pub fn insert(&self, kind: PromptKind, fingerprint: impl Into<String>, text: impl Into<String>) {
        self.exact
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert((kind, fingerprint.into()), text.into());
    }

    /// Loads `<dir>/<kind>/<fingerprint>.{txt,json}` scripts. Returns how many were loaded.
    pub fn load_dir(&self, dir: &Path) -> Result<usize> {
        let mut loaded = 0;
        for kind in PromptKind::ALL {
            let sub = dir.join(kind.as_str());
            if !sub.is_dir() {
                continue;
            }
            for entry in std::fs::read_dir(&sub)? {
                let path = entry?.path();
                let ext = path.extension().and_then(|e| e.to_str());
                if !matches!(ext, Some("txt" | "json")) {
                    continue;
                }
                let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                    continue;
                };
                self.insert(kind, stem, std::fs::read_to_string(&path)?);
                loaded += 1;
            }
        }
        Ok(loaded)
    }

    /// Rendered prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .map(|(_, _, p)| p.clone())
            .collect()
    }

    /// `(kind, fingerprint)` of every call so far, in call order.
    pub fn transcript(&self) -> Vec<(PromptKind, String)> {
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .map(|(k, f, _)| (*k, f.clone()))
            .collect()
    }

    pub fn calls(&self, kind: PromptKind) -> usize {
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter(|(k, _, _)| *k == kind)
            .count()
    }
}

impl ModelProvider for ScriptedProvider {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn send(&self, request: &ProviderRequest<'_>) -> Result<String> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push((
            request.kind,
            request.fingerprint.to_string(),
            request.prompt.to_string(),
        ));
        let key = (request.kind, request.fingerprint.to_string());
        if let Some(text) = self.exact.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(text.clone());
        }
        let queued = self
            .queues
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get_mut(&request.kind)
            .and_then(VecDeque::pop_front);
        match queued {
            Some(Script::Text(text)) => return Ok(text),
            Some(Script::Fail(message)) => return Err(Error::Provider(message)),
            None => {}
        }
        if let Some(text) = self.responder.as_ref().and_then(|r| r(request)) {
            return Ok(text);
        }
        Err(Error::Provider(format!(
            "no script for {} with fingerprint {}",
            request.kind, request.fingerprint
        )))
    }
}

/// A provider that is never reachable.
#[derive(Debug, Default, Clone)]
pub struct UnavailableProvider;

impl ModelProvider for UnavailableProvider {
    fn model_id(&self) -> String {
        "unavailable".into()
    }

    fn send(&self, request: &ProviderRequest<'_>) -> Result<String> {
        Err(Error::Provider(format!("provider unavailable for {}", request.kind)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ModelRequest};

    #[test]
    fn fixture_dir_scripts_match_by_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let req = ModelRequest::new(PromptKind::QaRoute).block("question", "Show me the duel");
        let sub = dir.path().join("qa_route");
        std::fs::create_dir_all(&sub).unwrap();
        std::fs::write(sub.join(format!("{}.json", req.fingerprint())), r#"{"needs_visual": true}"#).unwrap();
        let p = ScriptedProvider::new();
        assert_eq!(p.load_dir(dir.path()).unwrap(), 1);
        let g = Gateway::new(Arc::new(p), 0);
        let r = g.complete(&req).unwrap();
        assert_eq!(r.value.unwrap()["needs_visual"], true);
        let other = ModelRequest::new(PromptKind::QaRoute).block("question", "else");
        assert!(matches!(g.complete(&other), Err(Error::Provider(m)) if m.contains("no script")));
    }

    #[test]
    fn responder_is_pure_in_request() {
        let responder: Responder = Arc::new(|r| Some(format!("{{\"echo\": \"{}\"}}", r.fingerprint)));
        let p = Arc::new(ScriptedProvider::with_responder(responder));
        let g = Gateway::new(p.clone(), 0);
        let req = ModelRequest::new(PromptKind::MusicSelect).block("tones", "calm");
        let a = g.complete(&req).unwrap();
        let b = g.complete(&req).unwrap();
        assert_eq!(a, b);
        let t = p.transcript();
        assert_eq!(t[0], t[1]);
    }
}
