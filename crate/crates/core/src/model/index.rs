use std::collections::HashSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{fold_name, SCHEMA_VERSION};
use crate::canonical::{sha256_hex, to_canonical_bytes};
use crate::config::PipelineConfig;
use crate::time::{TimeRange, Timestamp};
use crate::validate::{Validate, ValidationReport};

/// Speaker marker for dialogue the pipeline could not attribute to a known character.
pub const UNATTRIBUTED: &str = "unattributed";

/// Largest tolerated hole in scene coverage.
const MAX_COVERAGE_GAP: Timestamp = Timestamp::from_secs(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NarrativeIndex {
    pub schema_version: u32,
    pub project_id: String,
    pub synopsis: GlobalSynopsis,
    pub characters: CharacterGraph,
    pub scenes: Vec<SceneTrace>,
    pub meta: IndexMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct IndexMeta {
    pub asset_id: String,
    pub media_duration: Timestamp,
    pub config: PipelineConfig,
    pub model: String,
    pub refinement_enabled: bool,
    /// RFC 3339 wall-clock creation time.
    pub created_at: String,
    /// Digest of the synopsis, character graph and scenes.
    pub content_hash: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MediaFormat {
    Cinematic,
    Instructional,
    Keynote,
    Interview,
    Sports,
    #[serde(other)]
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GlobalSynopsis {
    pub media_format: MediaFormat,
    pub setting: String,
    pub premise: String,
    pub plot_points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct PlotPoint {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<TimeRange>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct CharacterGraph {
    pub nodes: Vec<CharacterNode>,
    pub edges: Vec<CharacterEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct CharacterNode {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct CharacterEdge {
    pub from: String,
    pub to: String,
    pub relationship: String,
    #[serde(default)]
    pub evidence: Vec<TimeRange>,
}

impl CharacterGraph {
    /// Resolves a name or alias (case-insensitively) to the canonical node name.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        let key = fold_name(name);
        if key.is_empty() {
            return None;
        }
        self.nodes
            .iter()
            .find(|n| fold_name(&n.name) == key || n.aliases.iter().any(|a| fold_name(a) == key))
            .map(|n| n.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.resolve(name).is_some()
    }

    pub fn names(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.name.as_str()).collect()
    }

    /// Renders the graph as a textual adjacency map, one `from -> to: label` per line.
    pub fn adjacency_text(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            out.push_str(&format!("{}: {}\n", node.name, node.description));
        }
        for edge in &self.edges {
            out.push_str(&format!("{} -> {}: {}\n", edge.from, edge.to, edge.relationship));
        }
        out
    }
}

impl Validate for CharacterGraph {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let mut seen = HashSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.name.trim().is_empty() {
                r.push(format!("nodes[{i}].name"), "character name is empty");
            } else if !seen.insert(fold_name(&node.name)) {
                r.push(
                    format!("nodes[{i}].name"),
                    format!("duplicate character name `{}`", node.name),
                );
            }
        }
        for (i, edge) in self.edges.iter().enumerate() {
            for (end, name) in [("from", &edge.from), ("to", &edge.to)] {
                if !seen.contains(&fold_name(name)) {
                    r.push(
                        format!("edges[{i}].{end}"),
                        format!("edge endpoint `{name}` is not a character node"),
                    );
                }
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SceneTrace {
    pub scene_id: String,
    pub range: TimeRange,
    pub annotations: Vec<SemanticAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SemanticAnnotation {
    pub at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue: Option<Dialogue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_act: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affect: Option<Affect>,
    /// True when anchored to a cut the model reported rather than the regular interval.
    #[serde(default)]
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Dialogue {
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Affect {
    pub emotion: String,
    pub intensity: f64,
}

impl SemanticAnnotation {
    /// All free text carried by the annotation, space-joined. This is what
    /// lexical retrieval scores against.
    pub fn text(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if let Some(d) = &self.dialogue {
            parts.push(&d.speaker);
            parts.push(&d.text);
        }
        if let Some(s) = &self.speech_act {
            parts.push(s);
        }
        if let Some(v) = &self.visual {
            parts.push(v);
        }
        if let Some(a) = &self.affect {
            parts.push(&a.emotion);
        }
        parts.join(" ")
    }

    pub fn is_unattributed(&self) -> bool {
        self.dialogue.as_ref().is_some_and(|d| d.speaker == UNATTRIBUTED)
    }

    pub(crate) fn check(&self, path: &str, r: &mut ValidationReport) {
        let has_text = |s: &Option<String>| s.as_ref().is_some_and(|v| !v.trim().is_empty());
        if self.dialogue.is_none() && !has_text(&self.visual) && self.affect.is_none() {
            r.push(path, "annotation needs at least one of dialogue, visual or affect");
        }
        if let Some(a) = &self.affect {
            if !(0.0..=1.0).contains(&a.intensity) {
                r.push(format!("{path}.affect.intensity"), "intensity must lie in [0, 1]");
            }
        }
    }
}

impl SceneTrace {
    pub fn check(&self, max_gap: Timestamp) -> ValidationReport {
        let mut r = ValidationReport::default();
        if !self.range.is_well_formed() {
            r.push("range", "range start must precede end");
        }
        let mut prev: Option<Timestamp> = None;
        for (i, a) in self.annotations.iter().enumerate() {
            let path = format!("annotations[{i}]");
            a.check(&path, &mut r);
            if !self.range.contains(a.at) {
                r.push(
                    format!("{path}.at"),
                    format!("timestamp {} outside scene range {}", a.at, self.range),
                );
            }
            if let Some(p) = prev {
                if a.at <= p {
                    r.push(format!("{path}.at"), "annotation timestamps must strictly increase");
                } else if a.at - p > max_gap {
                    r.push(
                        format!("{path}.at"),
                        format!("gap of {} exceeds {}", a.at - p, max_gap),
                    );
                }
            }
            prev = Some(a.at);
        }
        r
    }

    pub fn unattributed_count(&self) -> usize {
        self.annotations.iter().filter(|a| a.is_unattributed()).count()
    }
}

impl NarrativeIndex {
    /// Digest of the narrative content, independent of provenance metadata.
    pub fn compute_content_hash(&self) -> String {
        let body = (&self.synopsis, &self.characters, &self.scenes);
        sha256_hex(&to_canonical_bytes(&body).expect("index content serializes"))
    }

    pub fn seal(&mut self) {
        self.meta.content_hash = self.compute_content_hash();
    }

    pub fn unattributed_count(&self) -> usize {
        self.scenes.iter().map(SceneTrace::unattributed_count).sum()
    }

    pub fn annotation_count(&self) -> usize {
        self.scenes.iter().map(|s| s.annotations.len()).sum()
    }

    /// Every timestamp a grounded answer may cite: annotation times and scene bounds.
    pub fn anchor_times(&self) -> Vec<Timestamp> {
        let mut out: Vec<Timestamp> = self
            .scenes
            .iter()
            .flat_map(|s| {
                [s.range.start, s.range.end]
                    .into_iter()
                    .chain(s.annotations.iter().map(|a| a.at))
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Holes in scene coverage of `[0, duration]` longer than one second.
    pub fn coverage_gaps(scenes: &[SceneTrace], duration: Timestamp) -> Vec<TimeRange> {
        let mut ranges: Vec<TimeRange> = scenes.iter().map(|s| s.range).collect();
        ranges.sort_by_key(|r| r.start);
        let mut gaps = Vec::new();
        let mut covered = Timestamp::ZERO;
        for r in ranges {
            if r.start > covered && r.start - covered > MAX_COVERAGE_GAP {
                gaps.push(TimeRange {
                    start: covered,
                    end: r.start,
                });
            }
            covered = covered.max(r.end);
        }
        if duration > covered && duration - covered > MAX_COVERAGE_GAP {
            gaps.push(TimeRange {
                start: covered,
                end: duration,
            });
        }
        gaps
    }
}

impl Validate for NarrativeIndex {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.schema_version != SCHEMA_VERSION {
            r.push(
                "schema_version",
                format!("unsupported schema version {}", self.schema_version),
            );
        }
        if self.meta.media_duration == Timestamp::ZERO {
            r.push("meta.media_duration", "duration must be > 0");
        }
        if self.meta.refinement_enabled && self.synopsis.plot_points.is_empty() {
            r.push("synopsis.plot_points", "plot points must be non-empty after refinement");
        }
        for (i, p) in self.synopsis.plot_points.iter().enumerate() {
            if let Some(range) = p.range {
                if !range.is_well_formed() {
                    r.push(format!("synopsis.plot_points[{i}].range"), "range start must precede end");
                }
            }
        }
        r.merge("characters", self.characters.validate());

        if self.scenes.windows(2).any(|w| w[0].range.start > w[1].range.start) {
            r.push("scenes", "scenes must be sorted by range start");
        }
        for gap in Self::coverage_gaps(&self.scenes, self.meta.media_duration) {
            r.push("scenes", format!("coverage gap > 1 s at {gap}"));
        }
        let max_gap = self.meta.config.max_annotation_gap();
        let mut ids = HashSet::new();
        for (i, scene) in self.scenes.iter().enumerate() {
            if !ids.insert(scene.scene_id.as_str()) {
                r.push(format!("scenes[{i}].scene_id"), "duplicate scene id");
            }
            r.merge(&format!("scenes[{i}]"), scene.check(max_gap));
            for (j, a) in scene.annotations.iter().enumerate() {
                if let Some(d) = &a.dialogue {
                    if d.speaker != UNATTRIBUTED && !self.characters.contains(&d.speaker) {
                        r.push(
                            format!("scenes[{i}].annotations[{j}].dialogue.speaker"),
                            format!("speaker `{}` is not a character node", d.speaker),
                        );
                    }
                }
            }
        }
        r
    }
}
