use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{describe_scene, synopsis_text, GlobalScaffold};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{SceneTrace, SegmentArtifact, SemanticAnnotation, UNATTRIBUTED};
use crate::time::Timestamp;
use crate::validate::ValidationReport;

/// Speaker name the scene pass heard but could not match to the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct UnresolvedSpeaker {
    pub at: Timestamp,
    pub heard: String,
}

/// Scene pass output: the raw trace plus what refinement needs to repair it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SceneDraft {
    pub trace: SceneTrace,
    #[serde(default)]
    pub unresolved: Vec<UnresolvedSpeaker>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SceneAnswer {
    annotations: Vec<SemanticAnnotation>,
}

/// Annotates one scene window with the scaffold in context.
///
/// Out-of-range timestamps get one repair; if they persist the call fails
/// with [`Error::Range`]. Speakers not in the scaffold graph are stored as
/// `unattributed` and reported.
pub fn comprehend_scene(
    scene: &SegmentArtifact,
    scene_id: &str,
    scaffold: &GlobalScaffold,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<SceneDraft> {
    let range = scene.range;
    let max_gap = config.max_annotation_gap();
    let request = ModelRequest::new(PromptKind::SceneComprehend)
        .block("synopsis", synopsis_text(&scaffold.draft_synopsis))
        .block("character_graph", scaffold.draft_graph.adjacency_text())
        .block("scene", describe_scene(scene, scene_id, config.annotation_interval))
        .attach(&scene.uri);
    let last_attempt = 1 + gateway.repair_attempts();

    let (annotations, _) = gateway.complete_json(&request, |answer: SceneAnswer, attempt| {
        let outside: Vec<String> = answer
            .annotations
            .iter()
            .filter(|a| !range.contains(a.at))
            .map(|a| a.at.to_string())
            .collect();
        if !outside.is_empty() {
            let msg = format!("timestamps {} outside scene range {range}", outside.join(", "));
            return if attempt >= 2 || attempt == last_attempt {
                Err(Rejection::Fatal(Error::Range(format!("scene {scene_id}: {msg}"))))
            } else {
                Err(Rejection::Retry(msg))
            };
        }
        if answer.annotations.is_empty() {
            return Err(Rejection::Retry("at least one annotation is required".into()));
        }
        let candidate = SceneTrace {
            scene_id: scene_id.to_string(),
            range,
            annotations: answer.annotations,
        };
        let report: ValidationReport = candidate.check(max_gap);
        if !report.is_empty() {
            return Err(Rejection::Retry(report.to_string()));
        }
        Ok(candidate.annotations)
    })?;

    let mut unresolved = Vec::new();
    let mut warnings = Vec::new();
    let annotations = annotations
        .into_iter()
        .map(|mut a| {
            if let Some(d) = a.dialogue.as_mut() {
                let heard = d.speaker.trim().to_string();
                match scaffold.draft_graph.resolve(&heard) {
                    Some(name) => d.speaker = name.to_string(),
                    None => {
                        if !heard.is_empty() && heard != UNATTRIBUTED {
                            warnings.push(format!(
                                "scene {scene_id}: unknown speaker `{heard}` at {} marked {UNATTRIBUTED}",
                                a.at
                            ));
                        }
                        unresolved.push(UnresolvedSpeaker { at: a.at, heard });
                        d.speaker = UNATTRIBUTED.to_string();
                    }
                }
            }
            a
        })
        .collect();
    Ok(SceneDraft {
        trace: SceneTrace {
            scene_id: scene_id.to_string(),
            range,
            annotations,
        },
        unresolved,
        warnings,
    })
}
