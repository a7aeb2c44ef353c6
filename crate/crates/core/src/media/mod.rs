//! Probing, segmentation planning, segment extraction and render execution.

mod engine;
mod graph;
mod segment;
pub mod synthetic;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, LazyLock, Mutex};

use serde::{Deserialize, Serialize};

pub use engine::{
    run_tool, CommandEngine, ExtractJob, ManifestNode, MediaEngine, NullEngine, ProbeInfo, RenderManifest,
    RenderOutcome, DEFAULT_EXTRACT_TEMPLATE, DEFAULT_PROBE_TEMPLATE,
};
pub use graph::{NodeId, RenderGraph, RenderOp, SubtitleCue};
pub use segment::{plan_segments, scene_id, SegmentPlan};

use crate::canonical::sha256_hex;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::model::{MediaAsset, SegmentArtifact};
use crate::store::{ArtifactKind, ArtifactRef, ArtifactStore};
use crate::time::{TimeRange, Timestamp};

/// Tolerance between a requested extraction range and the probed result.
const EXTRACT_TOLERANCE: Timestamp = Timestamp::from_secs(1);

fn local(store: &ArtifactStore, uri: &str) -> Result<PathBuf> {
    store
        .objects()
        .local_path(uri)
        .ok_or_else(|| Error::Store(format!("object {uri} has no local path")))
}

/// Probes a stored media object. Video is required.
pub fn probe(store: &ArtifactStore, uri: &str, engine: &dyn MediaEngine) -> Result<MediaAsset> {
    if !store.objects().exists(uri) {
        return Err(Error::NotFound(uri.to_string()));
    }
    let info = engine.probe(&local(store, uri)?)?;
    if info.duration == Timestamp::ZERO {
        return Err(Error::EmptyMedia);
    }
    if !info.has_video || info.width == 0 || info.height == 0 {
        return Err(Error::MediaProbe {
            uri: uri.to_string(),
            reason: "no video stream (video is required)".into(),
        });
    }
    Ok(MediaAsset {
        asset_id: format!("a{}", &sha256_hex(uri.as_bytes())[..12]),
        uri: uri.to_string(),
        duration: info.duration,
        width: info.width,
        height: info.height,
        fps: info.fps,
        has_audio: info.has_audio,
    })
}

/// Produces a downsampled copy of `range` under the project's `segments/` area.
pub fn extract_segment(
    store: &ArtifactStore,
    project: &str,
    asset: &MediaAsset,
    range: TimeRange,
    config: &PipelineConfig,
    engine: &dyn MediaEngine,
) -> Result<SegmentArtifact> {
    if !range.is_well_formed() || range.end > asset.duration {
        return Err(Error::Precondition(format!(
            "range {range} outside media duration {}",
            asset.duration
        )));
    }
    let uri = format!(
        "{project}/segments/segment-{}-{}-{}.{}",
        asset.asset_id,
        range.start.as_millis(),
        range.end.as_millis(),
        engine.segment_ext()
    );
    let output = local(store, &uri)?;
    engine.extract(&ExtractJob {
        input: &local(store, &asset.uri)?,
        range,
        height: config.target_height,
        fps: config.target_fps,
        quality: config.engine_quality,
        output: &output,
    })?;
    let info = engine.probe(&output)?;
    if info.duration.abs_diff(range.len()) > EXTRACT_TOLERANCE {
        return Err(Error::Engine {
            tool: engine.name().to_string(),
            diagnostics: format!(
                "segment {uri} lasts {} but {} was requested",
                info.duration,
                range.len()
            ),
        });
    }
    Ok(SegmentArtifact {
        uri,
        asset_id: asset.asset_id.clone(),
        range,
        width: info.width,
        height: info.height,
        fps: config.target_fps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedArtifact {
    pub artifact: ArtifactRef,
    pub manifest_only: bool,
    /// Duration implied by the graph.
    pub duration: Timestamp,
    /// Node kinds in execution order.
    pub node_order: Vec<String>,
}

static OUTPUT_LOCKS: LazyLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = LazyLock::new(Default::default);

/// Validates and executes a render graph, storing the result as the
/// project's `render` artifact.
pub fn execute_render_graph(
    store: &ArtifactStore,
    project: &str,
    graph: &RenderGraph,
    engine: &dyn MediaEngine,
) -> Result<RenderedArtifact> {
    let order = graph.topological_order()?;
    for node in &graph.nodes {
        let uris: Vec<&str> = match node {
            RenderOp::ExtractClip { asset_uri, .. } => vec![asset_uri],
            RenderOp::OverlayAudio { audio_uri, .. } => vec![audio_uri],
            RenderOp::MixMusic { track_uri, .. } => vec![track_uri],
            _ => vec![],
        };
        for uri in uris {
            if !store.objects().exists(uri) {
                return Err(Error::Graph(format!("referenced input {uri} does not exist")));
            }
        }
    }

    let kind = ArtifactKind::render();
    let lock = OUTPUT_LOCKS
        .lock()
        .expect("lock table poisoned")
        .entry(format!("{project}/{kind}"))
        .or_default()
        .clone();
    let _serial = lock.lock().unwrap_or_else(|e| e.into_inner());

    let work = tempfile_dir()?;
    let resolve = |uri: &str| local(store, uri);
    let outcome = engine.render(graph, &order, &resolve, &work);
    let _ = std::fs::remove_dir_all(&work);
    let outcome = outcome?;
    let artifact = store.put_with_ext(project, &kind, &outcome.bytes, &outcome.ext)?;
    Ok(RenderedArtifact {
        artifact,
        manifest_only: outcome.manifest_only,
        duration: graph.output_duration(),
        node_order: order.iter().map(|i| graph.nodes[*i].name().to_string()).collect(),
    })
}

fn tempfile_dir() -> Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("reelmind-render-{}", uuid::Uuid::new_v4().simple()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::synthetic::SyntheticMedia;
    use super::*;

    fn setup(media: &SyntheticMedia) -> (tempfile::TempDir, ArtifactStore, String) {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open_fs(dir.path()).unwrap();
        let r = store
            .put_artifact("p", &ArtifactKind::media("src"), &media.to_bytes())
            .unwrap();
        (dir, store, r.uri)
    }

    #[test]
    fn probe_generated_thirty_second_clip() {
        let (_d, store, uri) = setup(&SyntheticMedia::video(Timestamp::from_secs(30), 1920, 1080, 25.0));
        let asset = probe(&store, &uri, &NullEngine).unwrap();
        assert!(asset.duration.abs_diff(Timestamp::from_secs(30)) <= Timestamp::from_millis(100));
        assert!(asset.has_audio);
    }

    #[test]
    fn probe_text_file_is_probe_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open_fs(dir.path()).unwrap();
        let r = store.put_with_ext("p", &ArtifactKind::media("txt"), b"just text", "txt").unwrap();
        assert!(matches!(probe(&store, &r.uri, &NullEngine), Err(Error::MediaProbe { .. })));
    }

    #[test]
    fn probe_audio_only_is_probe_error() {
        let (_d, store, uri) = setup(&SyntheticMedia::audio(Timestamp::from_secs(30)));
        let err = probe(&store, &uri, &NullEngine).unwrap_err();
        assert!(matches!(err, Error::MediaProbe { reason, .. } if reason.contains("video")));
    }

    #[test]
    fn probe_zero_duration_is_empty_media() {
        let (_d, store, uri) = setup(&SyntheticMedia::video(Timestamp::ZERO, 640, 480, 25.0));
        assert!(matches!(probe(&store, &uri, &NullEngine), Err(Error::EmptyMedia)));
    }

    #[test]
    fn extract_downsamples_to_target() {
        let (_d, store, uri) = setup(&SyntheticMedia::video(Timestamp::from_secs(2400), 1920, 1080, 24.0));
        let source_before = store.objects().get(&uri).unwrap();
        let asset = probe(&store, &uri, &NullEngine).unwrap();
        let cfg = PipelineConfig::default();
        let seg = extract_segment(&store, "p", &asset, TimeRange::secs(0, 900), &cfg, &NullEngine).unwrap();
        assert_eq!(seg.height, 480);
        assert_eq!(seg.width, 854);
        assert_eq!(seg.fps, 1);
        let info = NullEngine.probe(&store.objects().local_path(&seg.uri).unwrap()).unwrap();
        assert!(info.duration.abs_diff(Timestamp::from_secs(900)) <= Timestamp::from_secs(1));
        assert_eq!(info.fps, 1.0);
        assert_eq!(store.objects().get(&uri).unwrap(), source_before);
    }

    #[test]
    fn extract_beyond_duration_is_precondition_error() {
        let (_d, store, uri) = setup(&SyntheticMedia::video(Timestamp::from_secs(60), 640, 480, 24.0));
        let asset = probe(&store, &uri, &NullEngine).unwrap();
        let err = extract_segment(&store, "p", &asset, TimeRange::secs(30, 90), &PipelineConfig::default(), &NullEngine);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn extract_with_absent_engine_names_tool() {
        let (_d, store, uri) = setup(&SyntheticMedia::video(Timestamp::from_secs(60), 640, 480, 24.0));
        let asset = probe(&store, &uri, &NullEngine).unwrap();
        let engine = CommandEngine::from_template("no-such-ffmpeg-build -i {input} {output}");
        let err = extract_segment(&store, "p", &asset, TimeRange::secs(0, 30), &PipelineConfig::default(), &engine)
            .unwrap_err();
        assert!(matches!(err, Error::Engine { tool, .. } if tool == "no-such-ffmpeg-build"));
    }

    #[test]
    fn null_engine_manifest_lists_nodes_in_topological_order() {
        let (_d, store, uri) = setup(&SyntheticMedia::video(Timestamp::from_secs(60), 640, 480, 24.0));
        let audio = store
            .put_with_ext("p", &ArtifactKind::new("narration-audio-n1").unwrap(), b"pcm", "wav")
            .unwrap();
        let mut g = RenderGraph::default();
        let a = g.push(RenderOp::ExtractClip { asset_uri: uri.clone(), range: TimeRange::secs(0, 10), mute: true });
        let b = g.push(RenderOp::ExtractClip { asset_uri: uri, range: TimeRange::secs(20, 30), mute: false });
        let o = g.push(RenderOp::OverlayAudio { input: a, audio_uri: audio.uri, offset: Timestamp::ZERO });
        let c = g.push(RenderOp::Concat { inputs: vec![o, b] });
        g.push(RenderOp::Output { input: c, container: "mp4".into(), width: 854, height: 480, aspect: "16:9".into() });
        let out = execute_render_graph(&store, "p", &g, &NullEngine).unwrap();
        assert!(out.manifest_only);
        assert_eq!(out.node_order, ["ExtractClip", "ExtractClip", "OverlayAudio", "Concat", "Output"]);
        assert_eq!(out.duration, Timestamp::from_secs(20));
        let manifest: RenderManifest = store.get_json(&out.artifact).unwrap();
        assert_eq!(manifest.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn missing_input_is_graph_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open_fs(dir.path()).unwrap();
        let mut g = RenderGraph::default();
        let a = g.push(RenderOp::ExtractClip { asset_uri: "p/media/none.json".into(), range: TimeRange::secs(0, 1), mute: false });
        g.push(RenderOp::Output { input: a, container: "mp4".into(), width: 2, height: 2, aspect: "1:1".into() });
        assert!(matches!(execute_render_graph(&store, "p", &g, &NullEngine), Err(Error::Graph(_))));
    }
}
