//! Media engine adapters: a subprocess engine driven by command templates and
//! a manifest-only null engine for hermetic runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::graph::{NodeId, RenderGraph, RenderOp, SubtitleCue};
use super::synthetic::{scaled_width, SyntheticMedia};
use crate::error::{Error, Result};
use crate::time::{TimeRange, Timestamp};

/// Stream properties reported by a probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInfo {
    pub duration: Timestamp,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub has_video: bool,
    pub has_audio: bool,
}

#[derive(Debug, Clone)]
pub struct ExtractJob<'a> {
    pub input: &'a Path,
    pub range: TimeRange,
    pub height: u32,
    pub fps: u32,
    pub quality: u32,
    pub output: &'a Path,
}

/// What an engine produced for a render graph.
#[derive(Debug, Clone)]
pub struct RenderOutcome {
    pub bytes: Vec<u8>,
    pub ext: String,
    /// True when only a manifest was produced (no media).
    pub manifest_only: bool,
}

pub trait MediaEngine: Send + Sync {
    fn name(&self) -> &str;
    fn probe(&self, path: &Path) -> Result<ProbeInfo>;
    /// File extension the engine writes segment artifacts with.
    fn segment_ext(&self) -> &str;
    fn extract(&self, job: &ExtractJob<'_>) -> Result<()>;
    /// Executes `graph` in `order`. `resolve` maps object-store uris to local paths.
    fn render(
        &self,
        graph: &RenderGraph,
        order: &[NodeId],
        resolve: &dyn Fn(&str) -> Result<PathBuf>,
        work_dir: &Path,
    ) -> Result<RenderOutcome>;
}

/// Manifest-only engine. Reads and writes synthetic containers.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullEngine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderManifest {
    pub engine: String,
    pub nodes: Vec<ManifestNode>,
    pub expected_duration: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestNode {
    pub id: NodeId,
    #[serde(flatten)]
    pub op: RenderOp,
}

impl MediaEngine for NullEngine {
    fn name(&self) -> &str {
        "null"
    }

    fn probe(&self, path: &Path) -> Result<ProbeInfo> {
        let bytes = fs::read(path).map_err(|e| Error::MediaProbe {
            uri: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let media = SyntheticMedia::parse(&bytes).ok_or_else(|| Error::MediaProbe {
            uri: path.display().to_string(),
            reason: "not a recognised media container".into(),
        })?;
        Ok(ProbeInfo {
            duration: media.duration,
            width: media.width,
            height: media.height,
            fps: media.fps,
            has_video: media.has_video,
            has_audio: media.has_audio,
        })
    }

    fn segment_ext(&self) -> &str {
        "json"
    }

    fn extract(&self, job: &ExtractJob<'_>) -> Result<()> {
        let src = self.probe(job.input)?;
        let mut seg = SyntheticMedia::video(
            job.range.len(),
            scaled_width(src.width, src.height, job.height),
            job.height,
            f64::from(job.fps),
        );
        seg.has_audio = src.has_audio;
        seg.label = Some(format!("{} {}", job.input.display(), job.range));
        if let Some(dir) = job.output.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(job.output, seg.to_bytes())?;
        Ok(())
    }

    fn render(
        &self,
        graph: &RenderGraph,
        order: &[NodeId],
        _resolve: &dyn Fn(&str) -> Result<PathBuf>,
        _work_dir: &Path,
    ) -> Result<RenderOutcome> {
        let manifest = RenderManifest {
            engine: self.name().to_string(),
            nodes: order
                .iter()
                .map(|id| ManifestNode {
                    id: *id,
                    op: graph.nodes[*id].clone(),
                })
                .collect(),
            expected_duration: graph.output_duration(),
        };
        Ok(RenderOutcome {
            bytes: crate::canonical::to_canonical_bytes(&manifest)?,
            ext: "json".into(),
            manifest_only: true,
        })
    }
}

pub const DEFAULT_EXTRACT_TEMPLATE: &str = "ffmpeg -nostdin -y -v error -ss {start} -to {end} -i {input} \
     -vf scale=-2:{height},fps={fps} -c:v libx264 -preset veryfast -crf {quality} -c:a aac {output}";

pub const DEFAULT_PROBE_TEMPLATE: &str =
    "ffprobe -v error -print_format json -show_format -show_streams {input}";

/// Subprocess engine. Segment extraction and probing follow command
/// templates with `{input} {start} {end} {height} {fps} {quality} {output}`
/// placeholders; render nodes are compiled to `ffmpeg` invocations.
#[derive(Debug, Clone)]
pub struct CommandEngine {
    pub extract_template: String,
    pub probe_template: String,
    pub ffmpeg: String,
}

impl Default for CommandEngine {
    fn default() -> Self {
        Self {
            extract_template: DEFAULT_EXTRACT_TEMPLATE.into(),
            probe_template: DEFAULT_PROBE_TEMPLATE.into(),
            ffmpeg: "ffmpeg".into(),
        }
    }
}

impl CommandEngine {
    /// Engine whose extraction follows `template`; the renderer uses the
    /// template's program.
    pub fn from_template(template: &str) -> Self {
        let program = template.split_whitespace().next().unwrap_or("ffmpeg").to_string();
        Self {
            extract_template: template.to_string(),
            ffmpeg: program,
            ..Self::default()
        }
    }
}

fn fill(template: &str, slots: &[(&str, String)]) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            slots
                .iter()
                .fold(tok.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        })
        .collect()
}

fn secs(t: Timestamp) -> String {
    format!("{:.3}", t.as_secs_f64())
}

/// Runs `argv`, returning stdout. Non-zero exit and spawn failures become
/// [`Error::Engine`] with stderr captured verbatim.
pub fn run_tool(argv: &[String]) -> Result<Vec<u8>> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::Engine {
            tool: String::new(),
            diagnostics: "empty command".into(),
        })?;
    let out = Command::new(program).args(args).output().map_err(|e| Error::Engine {
        tool: program.clone(),
        diagnostics: if e.kind() == std::io::ErrorKind::NotFound {
            format!("`{program}` not found on PATH")
        } else {
            e.to_string()
        },
    })?;
    if !out.status.success() {
        return Err(Error::Engine {
            tool: program.clone(),
            diagnostics: String::from_utf8_lossy(&out.stderr).into_owned(),
        });
    }
    Ok(out.stdout)
}

fn parse_ffprobe(path: &Path, stdout: &[u8]) -> Result<ProbeInfo> {
    let bad = |reason: &str| Error::MediaProbe {
        uri: path.display().to_string(),
        reason: reason.to_string(),
    };
    let v: serde_json::Value = serde_json::from_slice(stdout).map_err(|_| bad("unreadable probe output"))?;
    let duration = v["format"]["duration"]
        .as_str()
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| bad("container reports no duration"))?;
    let streams = v["streams"].as_array().cloned().unwrap_or_default();
    let video = streams.iter().find(|s| s["codec_type"] == "video");
    let has_audio = streams.iter().any(|s| s["codec_type"] == "audio");
    let fps = video
        .and_then(|s| s["r_frame_rate"].as_str())
        .and_then(|r| {
            let (n, d) = r.split_once('/')?;
            let (n, d): (f64, f64) = (n.parse().ok()?, d.parse().ok()?);
            (d > 0.0).then(|| n / d)
        })
        .unwrap_or(0.0);
    Ok(ProbeInfo {
        duration: Timestamp::from_secs_f64(duration).map_err(|_| bad("invalid duration"))?,
        width: video.and_then(|s| s["width"].as_u64()).unwrap_or(0) as u32,
        height: video.and_then(|s| s["height"].as_u64()).unwrap_or(0) as u32,
        fps,
        has_video: video.is_some(),
        has_audio,
    })
}

fn srt(cues: &[SubtitleCue]) -> String {
    let stamp = |t: Timestamp| t.to_string().replace('.', ",");
    cues.iter()
        .enumerate()
        .map(|(i, c)| format!("{}\n{} --> {}\n{}\n", i + 1, stamp(c.range.start), stamp(c.range.end), c.text))
        .collect::<Vec<_>>()
        .join("\n")
}

impl MediaEngine for CommandEngine {
    fn name(&self) -> &str {
        &self.ffmpeg
    }

    fn probe(&self, path: &Path) -> Result<ProbeInfo> {
        let argv = fill(&self.probe_template, &[("input", path.display().to_string())]);
        let stdout = run_tool(&argv).map_err(|e| match e {
            Error::Engine { diagnostics, .. } => Error::MediaProbe {
                uri: path.display().to_string(),
                reason: diagnostics,
            },
            other => other,
        })?;
        parse_ffprobe(path, &stdout)
    }

    fn segment_ext(&self) -> &str {
        "mp4"
    }

    fn extract(&self, job: &ExtractJob<'_>) -> Result<()> {
        if let Some(dir) = job.output.parent() {
            fs::create_dir_all(dir)?;
        }
        let argv = fill(
            &self.extract_template,
            &[
                ("input", job.input.display().to_string()),
                ("start", secs(job.range.start)),
                ("end", secs(job.range.end)),
                ("height", job.height.to_string()),
                ("fps", job.fps.to_string()),
                ("quality", job.quality.to_string()),
                ("output", job.output.display().to_string()),
            ],
        );
        run_tool(&argv).map(|_| ())
    }

    fn render(
        &self,
        graph: &RenderGraph,
        order: &[NodeId],
        resolve: &dyn Fn(&str) -> Result<PathBuf>,
        work_dir: &Path,
    ) -> Result<RenderOutcome> {
        fs::create_dir_all(work_dir)?;
        let (width, height, container) = match graph.output() {
            Some((_, RenderOp::Output { width, height, container, .. })) => (*width, *height, container.clone()),
            _ => return Err(Error::Graph("render graph has no Output node".into())),
        };
        let node_path = |id: NodeId| work_dir.join(format!("n{id:03}.mp4"));
        let ff = |args: Vec<String>| {
            let mut argv = vec![self.ffmpeg.clone(), "-nostdin".into(), "-y".into(), "-v".into(), "error".into()];
            argv.extend(args);
            run_tool(&argv).map(|_| ())
        };
        let s = |x: &str| x.to_string();
        let p = |x: &Path| x.display().to_string();
        let mut final_path = None;
        for &id in order {
            let out = node_path(id);
            match &graph.nodes[id] {
                RenderOp::ExtractClip { asset_uri, range, mute } => {
                    let input = resolve(asset_uri)?;
                    let vf = format!(
                        "scale={width}:{height}:force_original_aspect_ratio=decrease,pad={width}:{height}:(ow-iw)/2:(oh-ih)/2,setsar=1,fps=30"
                    );
                    let mut args = vec![s("-ss"), secs(range.start), s("-to"), secs(range.end), s("-i"), p(&input)];
                    if *mute {
                        args.extend([s("-f"), s("lavfi"), s("-i"), s("anullsrc=r=48000:cl=stereo")]);
                        args.extend([s("-map"), s("0:v"), s("-map"), s("1:a"), s("-shortest")]);
                    } else {
                        args.extend([s("-map"), s("0:v"), s("-map"), s("0:a")]);
                    }
                    args.extend([s("-vf"), vf, s("-c:v"), s("libx264"), s("-preset"), s("veryfast")]);
                    args.extend([s("-c:a"), s("aac"), s("-ar"), s("48000"), s("-ac"), s("2"), p(&out)]);
                    ff(args)?;
                }
                RenderOp::OverlayAudio { input, audio_uri, offset } => {
                    let len = secs(graph.duration_of(*input));
                    let audio = resolve(audio_uri)?;
                    ff(vec![
                        s("-i"), p(&node_path(*input)), s("-ss"), secs(*offset), s("-i"), p(&audio),
                        s("-filter_complex"), format!("[1:a]apad,atrim=0:{len},aresample=48000[n]"),
                        s("-map"), s("0:v"), s("-map"), s("[n]"), s("-c:v"), s("copy"), s("-c:a"), s("aac"),
                        s("-ac"), s("2"), s("-t"), len, p(&out),
                    ])?;
                }
                RenderOp::BurnSubtitle { input, cues } => {
                    let srt_path = work_dir.join(format!("n{id:03}.srt"));
                    fs::write(&srt_path, srt(cues))?;
                    ff(vec![
                        s("-i"), p(&node_path(*input)), s("-vf"), format!("subtitles={}", p(&srt_path)),
                        s("-c:a"), s("copy"), p(&out),
                    ])?;
                }
                RenderOp::Concat { inputs } => {
                    let mut args = Vec::new();
                    let mut filter = String::new();
                    for (k, input) in inputs.iter().enumerate() {
                        args.extend([s("-i"), p(&node_path(*input))]);
                        filter.push_str(&format!("[{k}:v][{k}:a]"));
                    }
                    filter.push_str(&format!("concat=n={}:v=1:a=1[v][a]", inputs.len()));
                    args.extend([s("-filter_complex"), filter, s("-map"), s("[v]"), s("-map"), s("[a]")]);
                    args.extend([s("-c:v"), s("libx264"), s("-preset"), s("veryfast"), s("-c:a"), s("aac"), p(&out)]);
                    ff(args)?;
                }
                RenderOp::MixMusic { input, track_uri, gain } => {
                    let track = resolve(track_uri)?;
                    ff(vec![
                        s("-i"), p(&node_path(*input)), s("-stream_loop"), s("-1"), s("-i"), p(&track),
                        s("-filter_complex"),
                        format!("[1:a]volume={gain}[m];[0:a][m]amix=inputs=2:duration=first:normalize=0[a]"),
                        s("-map"), s("0:v"), s("-map"), s("[a]"), s("-c:v"), s("copy"), s("-c:a"), s("aac"), p(&out),
                    ])?;
                }
                RenderOp::Output { input, aspect, .. } => {
                    let out = work_dir.join(format!("output.{container}"));
                    ff(vec![s("-i"), p(&node_path(*input)), s("-c"), s("copy"), s("-aspect"), aspect.clone(), p(&out)])?;
                    final_path = Some(out);
                }
            }
        }
        let final_path = final_path.ok_or_else(|| Error::Graph("Output node was not executed".into()))?;
        Ok(RenderOutcome {
            bytes: fs::read(&final_path)?,
            ext: container,
            manifest_only: false,
        })
    }
}
