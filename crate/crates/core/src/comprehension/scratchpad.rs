use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{describe_segment, lenient_format, SegmentSummary};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::gateway::{estimate_tokens, Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{fold_name, MediaFormat, SegmentArtifact};

/// Rolling memory carried across macro segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Scratchpad {
    pub media_format: MediaFormat,
    pub setting: String,
    pub premise: String,
    /// Character name to a short description.
    pub characters: BTreeMap<String, String>,
    pub dynamics: Vec<String>,
    pub open_threads: Vec<String>,
    /// `estimate_tokens(self.render())`, kept in sync by [`Scratchpad::refresh`].
    pub token_estimate: u64,
}

impl Scratchpad {
    /// The text handed to the model, and what the token estimate measures.
    pub fn render(&self) -> String {
        let format = serde_json::to_value(self.media_format)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let mut out = format!(
            "media_format: {format}\nsetting: {}\npremise: {}\ncharacters:\n",
            self.setting, self.premise
        );
        for (name, description) in &self.characters {
            out.push_str(&format!("- {name}: {description}\n"));
        }
        out.push_str("dynamics:\n");
        for d in &self.dynamics {
            out.push_str(&format!("- {d}\n"));
        }
        out.push_str("open_threads:\n");
        for t in &self.open_threads {
            out.push_str(&format!("- {t}\n"));
        }
        out
    }

    pub fn refresh(&mut self) {
        self.token_estimate = estimate_tokens(&self.render());
    }

    pub fn names(&self) -> Vec<&str> {
        self.characters.keys().map(String::as_str).collect()
    }

    fn has_name(&self, name: &str) -> bool {
        let key = fold_name(name);
        self.characters.keys().any(|n| fold_name(n) == key)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub(crate) struct NamedDescription {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// Scratchpad as the model writes it (bootstrap and compression).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct ScratchpadDraft {
    media_format: String,
    setting: String,
    premise: String,
    characters: Vec<NamedDescription>,
    dynamics: Vec<String>,
    open_threads: Vec<String>,
}

fn or_unknown(s: String) -> String {
    if s.trim().is_empty() {
        "unknown".into()
    } else {
        s.trim().to_string()
    }
}

impl ScratchpadDraft {
    fn into_scratchpad(self) -> Scratchpad {
        let mut characters = BTreeMap::new();
        for c in self.characters {
            let name = c.name.trim().to_string();
            if !name.is_empty() && !characters.keys().any(|n: &String| fold_name(n) == fold_name(&name)) {
                characters.insert(name, c.description.trim().to_string());
            }
        }
        let mut pad = Scratchpad {
            media_format: lenient_format(&self.media_format),
            setting: or_unknown(self.setting),
            premise: or_unknown(self.premise),
            characters,
            dynamics: self.dynamics,
            open_threads: self.open_threads,
            token_estimate: 0,
        };
        pad.refresh();
        pad
    }
}

/// Builds the first scratchpad from the opening macro segment.
pub fn bootstrap_scratchpad(
    first_segment: &SegmentArtifact,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<Scratchpad> {
    if first_segment.range.start != crate::time::Timestamp::ZERO {
        return Err(Error::Precondition(format!(
            "bootstrap needs the first macro segment, got {}",
            first_segment.range
        )));
    }
    let request = ModelRequest::new(PromptKind::BootstrapScratchpad)
        .block("segment", describe_segment(first_segment))
        .attach(&first_segment.uri);
    let (pad, _) = gateway.complete_json(&request, |d: ScratchpadDraft, _| Ok(d.into_scratchpad()))?;
    compress_scratchpad(&pad, gateway, config)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct SegmentUpdate {
    summary: String,
    new_characters: Vec<NamedDescription>,
    dynamics: Vec<String>,
    open_threads: Vec<String>,
    resolved_threads: Vec<String>,
}

/// Interprets one macro segment in light of the scratchpad, returning its
/// summary and the updated (and, if needed, compressed) scratchpad.
pub fn comprehend_segment(
    segment: &SegmentArtifact,
    scratchpad: &Scratchpad,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<(SegmentSummary, Scratchpad)> {
    if scratchpad.token_estimate > config.scratchpad_budget {
        return Err(Error::Precondition(format!(
            "scratchpad estimate {} exceeds budget {}",
            scratchpad.token_estimate, config.scratchpad_budget
        )));
    }
    let request = ModelRequest::new(PromptKind::SegmentComprehend)
        .block("scratchpad", scratchpad.render())
        .block("segment", describe_segment(segment))
        .attach(&segment.uri);
    let (update, _) = gateway.complete_json(&request, |u: SegmentUpdate, _| {
        if u.summary.trim().is_empty() {
            Err(Rejection::Retry("summary must be non-empty".into()))
        } else {
            Ok(u)
        }
    })?;

    let mut next = scratchpad.clone();
    for c in update.new_characters {
        let name = c.name.trim();
        if !name.is_empty() && !next.has_name(name) {
            next.characters.insert(name.to_string(), c.description.trim().to_string());
        }
    }
    for d in update.dynamics {
        if !next.dynamics.contains(&d) {
            next.dynamics.push(d);
        }
    }
    let resolved: Vec<String> = update.resolved_threads.iter().map(|t| fold_name(t)).collect();
    next.open_threads.retain(|t| !resolved.contains(&fold_name(t)));
    for t in update.open_threads {
        if !next.open_threads.contains(&t) && !resolved.contains(&fold_name(&t)) {
            next.open_threads.push(t);
        }
    }
    next.refresh();
    let next = compress_scratchpad(&next, gateway, config)?;
    let summary = SegmentSummary {
        range: segment.range,
        text: update.summary.trim().to_string(),
    };
    Ok((summary, next))
}

const OVER_BUDGET: &str = "over budget";

/// Distills the scratchpad when it exceeds the budget; identity otherwise.
/// Character names always survive, with descriptions emptied if the model
/// dropped them.
pub fn compress_scratchpad(
    scratchpad: &Scratchpad,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<Scratchpad> {
    let budget = config.scratchpad_budget;
    if scratchpad.token_estimate <= budget {
        return Ok(scratchpad.clone());
    }
    let request = ModelRequest::new(PromptKind::CompressScratchpad)
        .block("scratchpad", scratchpad.render())
        .block("budget", format!("max_tokens: {budget}"));
    let result = gateway.complete_json(&request, |d: ScratchpadDraft, _| {
        let mut pad = d.into_scratchpad();
        for name in scratchpad.characters.keys() {
            if !pad.has_name(name) {
                pad.characters.insert(name.clone(), String::new());
            }
        }
        pad.refresh();
        if pad.token_estimate > budget {
            Err(Rejection::Retry(format!(
                "{OVER_BUDGET}: compressed scratchpad estimates {} tokens, budget is {budget}",
                pad.token_estimate
            )))
        } else {
            Ok(pad)
        }
    });
    match result {
        Ok((pad, _)) => Ok(pad),
        Err(Error::StructuredOutput { attempts, .. })
            if attempts
                .last()
                .and_then(|a| a.error.as_deref())
                .is_some_and(|e| e.starts_with(OVER_BUDGET)) =>
        {
            Err(Error::Budget(format!(
                "scratchpad still over {budget} tokens after {} compression attempts",
                attempts.len()
            )))
        }
        Err(e) => Err(e),
    }
}
