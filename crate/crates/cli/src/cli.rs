//! Command-line dispatch.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use reelmind_core::model::NarrativeIndex;
use reelmind_core::orchestrator::WorkflowRecord;
use reelmind_core::qa::QaResponse;
use reelmind_core::store::ArtifactKind;
use reelmind_core::testkit::Story;
use reelmind_core::time::Timestamp;
use reelmind_core::{Error, Result};

use crate::ops;
use crate::view::{exit_code, record_exit_code, WorkflowView};
use crate::workspace::{default_project_id, Settings, Workspace};

#[derive(Debug, Parser)]
#[command(name = "reelmind", version, about = "Index long-form video, ask about it, and compile edits from prompts")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project from media files and probe them.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Project id; defaults to the first file's name.
        #[arg(long)]
        project: Option<String>,
    },
    /// Build the narrative index.
    Index {
        project: String,
        /// Skip the refinement pass.
        #[arg(long)]
        no_refine: bool,
    },
    /// Ask a question about the indexed video.
    Ask { project: String, question: String },
    /// Compile an edit from a prompt.
    Edit {
        project: String,
        prompt: String,
        /// Number of independent variants to compile.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..=16))]
        variants: u16,
    },
    /// Show a workflow's progress.
    Status { workflow: String },
    /// Continue an interrupted or failed workflow.
    Resume { workflow: String },
    /// List a project's artifacts, or print the latest of one kind.
    Artifacts { project: String, kind: Option<String> },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Write a synthetic media file for offline runs.
    Fixture {
        path: PathBuf,
        #[arg(long, default_value_t = 2400)]
        secs: u64,
    },
}

/// Parses `args` (program name first) and runs the command against the
/// environment's settings.
pub fn main_with(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    run(args, Settings::from_env, out, err)
}

pub fn run(args: Vec<String>, settings: impl FnOnce() -> Settings, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => 1,
            };
        }
    };
    let json = cli.json;
    let result = Workspace::open(settings()).and_then(|ws| dispatch(&Arc::new(ws), cli.command));
    match result {
        Ok(report) => {
            let _ = if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report.json).unwrap_or_default())
            } else {
                writeln!(out, "{}", report.text.trim_end())
            };
            report.code
        }
        Err(e) => {
            if json {
                let _ = writeln!(out, "{}", crate::view::error_json(&e));
            }
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// What a command prints, in both forms, and its exit code.
pub struct Report {
    pub text: String,
    pub json: Value,
    pub code: u8,
}

impl Report {
    fn ok(text: String, json: Value) -> Self {
        Self { text, json, code: 0 }
    }
}

fn workflow_text(view: &WorkflowView) -> String {
    view.summary()
}

pub fn dispatch(ws: &Arc<Workspace>, command: Command) -> Result<Report> {
    match command {
        Command::Ingest { paths, project } => {
            let project = match project {
                Some(p) => p,
                None => default_project_id(&paths)?,
            };
            let p = ws.ingest(&project, &paths)?;
            let mut text = format!("project {}", p.project_id);
            for a in &p.assets {
                text.push_str(&format!(
                    "\n  {}  {}  {}x{} @ {} fps{}",
                    a.asset_id,
                    a.duration,
                    a.width,
                    a.height,
                    a.fps,
                    if a.has_audio { "" } else { "  (no audio)" }
                ));
            }
            Ok(Report::ok(text, serde_json::to_value(&p).map_err(|e| Error::Store(e.to_string()))?))
        }
        Command::Index { project, no_refine } => {
            let id = ops::launch(ws, &project, "comprehend", ops::index_params(!no_refine))?;
            let record = ws.wait(&id)?;
            index_report(ws, &record)
        }
        Command::Ask { project, question } => {
            let id = ops::launch(ws, &project, "qa", ops::qa_params(&question))?;
            let record = ws.wait(&id)?;
            ask_report(ws, &record)
        }
        Command::Edit {
            project,
            prompt,
            variants,
        } => {
            let ids = ops::launch_edit(ws, &project, &prompt, usize::from(variants))?;
            let records = ops::wait_all(ws, &ids)?;
            let views: Vec<WorkflowView> = records.iter().map(|r| WorkflowView::new(ws.store(), r)).collect();
            let mut text = String::new();
            for v in &views {
                text.push_str(&workflow_text(v));
                text.push('\n');
                if let Some(uri) = &v.download_uri {
                    text.push_str(&format!("render: {uri}\n"));
                }
            }
            let code = records.iter().map(record_exit_code).max().unwrap_or(0);
            Ok(Report {
                text,
                json: json!({ "workflows": views }),
                code,
            })
        }
        Command::Status { workflow } => {
            let record = ws.record(&workflow)?;
            let view = WorkflowView::new(ws.store(), &record);
            Ok(Report::ok(workflow_text(&view), to_json(&view)?))
        }
        Command::Resume { workflow } => {
            let record = ws.resume(&workflow)?;
            let view = WorkflowView::new(ws.store(), &record);
            Ok(Report {
                text: workflow_text(&view),
                json: to_json(&view)?,
                code: record_exit_code(&record),
            })
        }
        Command::Artifacts { project, kind } => artifacts(ws, &project, kind.as_deref()),
        Command::Serve { addr } => {
            crate::http::serve_blocking(ws.clone(), addr)?;
            Ok(Report::ok(String::new(), Value::Null))
        }
        Command::Fixture { path, secs } => {
            if secs == 0 {
                return Err(Error::Precondition("fixture length must be > 0".into()));
            }
            let media = Story::media(Timestamp::from_secs(secs));
            std::fs::write(&path, media.to_bytes())?;
            Ok(Report::ok(
                format!("wrote {} ({secs} s)", path.display()),
                json!({ "path": path, "duration": Timestamp::from_secs(secs) }),
            ))
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Store(e.to_string()))
}

fn index_report(ws: &Workspace, record: &WorkflowRecord) -> Result<Report> {
    let view = WorkflowView::new(ws.store(), record);
    let mut text = workflow_text(&view);
    let mut json = json!({ "workflow": view });
    if let Some(r) = &record.result {
        let index: NarrativeIndex = ws.store().get_json(r)?;
        text.push_str(&format!(
            "\nindex: {}\nscenes: {}, annotations: {}, unattributed: {}\nrefinement: {}",
            r.uri,
            index.scenes.len(),
            index.annotation_count(),
            index.unattributed_count(),
            if index.meta.refinement_enabled { "enabled" } else { "disabled" }
        ));
        json["index"] = json!({
            "artifact": r,
            "scenes": index.scenes.len(),
            "annotations": index.annotation_count(),
            "unattributed": index.unattributed_count(),
            "refinement_enabled": index.meta.refinement_enabled,
            "warnings": index.meta.warnings,
        });
    }
    Ok(Report {
        text,
        json,
        code: record_exit_code(record),
    })
}

fn ask_report(ws: &Workspace, record: &WorkflowRecord) -> Result<Report> {
    let view = WorkflowView::new(ws.store(), record);
    let Some(r) = &record.result else {
        return Ok(Report {
            text: workflow_text(&view),
            json: json!({ "workflow": view }),
            code: record_exit_code(record),
        });
    };
    let answer: QaResponse = ws.store().get_json(r)?;
    let cites: Vec<String> = answer.cited_timestamps.iter().map(Timestamp::to_string).collect();
    let mut text = format!(
        "{}\ncitations: {}\ngrounded: {}",
        answer.answer,
        if cites.is_empty() { "none".to_string() } else { cites.join(", ") },
        if answer.grounded { "yes" } else { "no" }
    );
    for c in &answer.evidence_clips {
        text.push_str(&format!("\nclip {}: {}", c.source, c.justification));
    }
    for w in &answer.warnings {
        text.push_str(&format!("\nwarning: {w}"));
    }
    Ok(Report::ok(text, json!({ "workflow_id": record.workflow_id, "answer": answer })))
}

fn artifacts(ws: &Workspace, project: &str, kind: Option<&str>) -> Result<Report> {
    ws.project(project)?;
    match kind {
        None => {
            let refs = ws.store().list_kinds(project)?;
            let text = refs
                .iter()
                .map(|r| format!("{:<28} {}  {}", r.kind.as_str(), &r.hash[..12], r.uri))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Report::ok(text, to_json(&refs)?))
        }
        Some(kind) => {
            let kind = ArtifactKind::new(kind)?;
            let r = ws.store().latest(project, &kind)?;
            let bytes = ws.store().get_artifact(&r)?;
            match serde_json::from_slice::<Value>(&bytes) {
                Ok(v) => Ok(Report::ok(String::from_utf8_lossy(&bytes).into_owned(), v)),
                Err(_) => Ok(Report::ok(
                    format!("{} ({} bytes, binary)\n{}", r.uri, bytes.len(), r.hash),
                    to_json(&r)?,
                )),
            }
        }
    }
}
