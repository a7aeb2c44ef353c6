use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which prompt a request uses. Each kind binds one template and one output shape.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    BootstrapScratchpad,
    SegmentComprehend,
    CompressScratchpad,
    DraftScaffold,
    SceneComprehend,
    Refine,
    QaRoute,
    QaAnswer,
    StoryboardReason,
    StoryboardStructure,
    Narrate,
    RetrieveClips,
    ClassifyRenderingMode,
    MusicSelect,
}

/// Expected shape of a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputShape {
    /// Freeform text; any non-empty answer is accepted.
    Text,
    /// A single JSON object.
    JsonObject,
}

impl PromptKind {
    pub const ALL: [PromptKind; 14] = [
        PromptKind::BootstrapScratchpad,
        PromptKind::SegmentComprehend,
        PromptKind::CompressScratchpad,
        PromptKind::DraftScaffold,
        PromptKind::SceneComprehend,
        PromptKind::Refine,
        PromptKind::QaRoute,
        PromptKind::QaAnswer,
        PromptKind::StoryboardReason,
        PromptKind::StoryboardStructure,
        PromptKind::Narrate,
        PromptKind::RetrieveClips,
        PromptKind::ClassifyRenderingMode,
        PromptKind::MusicSelect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::BootstrapScratchpad => "bootstrap_scratchpad",
            PromptKind::SegmentComprehend => "segment_comprehend",
            PromptKind::CompressScratchpad => "compress_scratchpad",
            PromptKind::DraftScaffold => "draft_scaffold",
            PromptKind::SceneComprehend => "scene_comprehend",
            PromptKind::Refine => "refine",
            PromptKind::QaRoute => "qa_route",
            PromptKind::QaAnswer => "qa_answer",
            PromptKind::StoryboardReason => "storyboard_reason",
            PromptKind::StoryboardStructure => "storyboard_structure",
            PromptKind::Narrate => "narrate",
            PromptKind::RetrieveClips => "retrieve_clips",
            PromptKind::ClassifyRenderingMode => "classify_rendering_mode",
            PromptKind::MusicSelect => "music_select",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::BootstrapScratchpad => include_str!("../../templates/bootstrap_scratchpad.txt"),
            PromptKind::SegmentComprehend => include_str!("../../templates/segment_comprehend.txt"),
            PromptKind::CompressScratchpad => include_str!("../../templates/compress_scratchpad.txt"),
            PromptKind::DraftScaffold => include_str!("../../templates/draft_scaffold.txt"),
            PromptKind::SceneComprehend => include_str!("../../templates/scene_comprehend.txt"),
            PromptKind::Refine => include_str!("../../templates/refine.txt"),
            PromptKind::QaRoute => include_str!("../../templates/qa_route.txt"),
            PromptKind::QaAnswer => include_str!("../../templates/qa_answer.txt"),
            PromptKind::StoryboardReason => include_str!("../../templates/storyboard_reason.txt"),
            PromptKind::StoryboardStructure => include_str!("../../templates/storyboard_structure.txt"),
            PromptKind::Narrate => include_str!("../../templates/narrate.txt"),
            PromptKind::RetrieveClips => include_str!("../../templates/retrieve_clips.txt"),
            PromptKind::ClassifyRenderingMode => {
                include_str!("../../templates/classify_rendering_mode.txt")
            }
            PromptKind::MusicSelect => include_str!("../../templates/music_select.txt"),
        }
    }

    pub fn output_shape(self) -> OutputShape {
        match self {
            PromptKind::StoryboardReason => OutputShape::Text,
            _ => OutputShape::JsonObject,
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown prompt kind `{s}`")))
    }
}
