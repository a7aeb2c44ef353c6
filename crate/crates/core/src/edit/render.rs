use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{RenderGraph, RenderOp, SubtitleCue};
use crate::model::{EditPlan, RenderingMode};
use crate::time::Timestamp;

/// Music level under narration, and without it.
pub const MUSIC_GAIN_UNDER_NARRATION: f64 = 0.3;
pub const MUSIC_GAIN_ALONE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct OutputSpec {
    pub container: String,
    pub width: u32,
    pub height: u32,
    pub aspect: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            container: "mp4".into(),
            width: 1280,
            height: 720,
            aspect: "16:9".into(),
        }
    }
}

/// Lowers a plan into a render graph: one extract per entry, narration laid
/// over overlay clips, then concat, subtitles, music and a single output.
pub fn build_render_graph(plan: &EditPlan, cues: &[SubtitleCue], output: &OutputSpec) -> Result<RenderGraph> {
    if plan.entries.is_empty() {
        return Err(Error::Graph("plan has no entries".into()));
    }
    let ranges = plan.output_ranges();
    let spans = plan.narration_spans();
    let mut g = RenderGraph::default();
    let mut parts = Vec::with_capacity(plan.entries.len());
    for (entry, out_range) in plan.entries.iter().zip(&ranges) {
        let source = plan
            .sources
            .iter()
            .find(|s| s.asset_id == entry.asset_id)
            .ok_or_else(|| Error::Graph(format!("entry references unknown asset {}", entry.asset_id)))?;
        let overlay = entry.rendering_mode == RenderingMode::NarratedOverlay;
        let mut node = g.push(RenderOp::ExtractClip {
            asset_uri: source.uri.clone(),
            range: entry.source,
            mute: overlay,
        });
        if overlay {
            let id = entry.narration_id.as_deref().unwrap_or_default();
            let narration = plan
                .narration
                .iter()
                .find(|n| n.narration_id == id)
                .ok_or_else(|| Error::Graph(format!("overlay clip bound to unknown narration `{id}`")))?;
            let audio_uri = narration
                .audio_uri
                .clone()
                .ok_or_else(|| Error::Graph(format!("narration {id} has no synthesized audio")))?;
            let span_start = spans
                .iter()
                .find(|(sid, _)| sid == id)
                .map_or(out_range.start, |(_, r)| r.start);
            node = g.push(RenderOp::OverlayAudio {
                input: node,
                audio_uri,
                offset: out_range.start.saturating_sub(span_start),
            });
        }
        parts.push(node);
    }
    let mut node = g.push(RenderOp::Concat { inputs: parts });
    if !cues.is_empty() {
        node = g.push(RenderOp::BurnSubtitle {
            input: node,
            cues: cues.to_vec(),
        });
    }
    if let Some(music) = &plan.music {
        let narrated = plan.narration_duration() > Timestamp::ZERO;
        node = g.push(RenderOp::MixMusic {
            input: node,
            track_uri: music.uri.clone(),
            gain: if narrated { MUSIC_GAIN_UNDER_NARRATION } else { MUSIC_GAIN_ALONE },
        });
    }
    g.push(RenderOp::Output {
        input: node,
        container: output.container.clone(),
        width: output.width,
        height: output.height,
        aspect: output.aspect.clone(),
    });
    g.topological_order()?;
    Ok(g)
}
