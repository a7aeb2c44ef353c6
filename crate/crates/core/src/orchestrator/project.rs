use std::path::Path;

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::media::{probe, MediaEngine};
use crate::model::Project;
use crate::store::{ArtifactKind, ArtifactStore};

/// Copies media files into the store, probes them and records the project.
///
/// Re-ingesting into an existing project replaces its media list; workflows
/// started from the old media then refuse to resume.
pub fn create_project(
    store: &ArtifactStore,
    project_id: &str,
    files: &[impl AsRef<Path>],
    engine: &dyn MediaEngine,
    clock: &dyn Clock,
) -> Result<Project> {
    if files.is_empty() {
        return Err(Error::Precondition("ingest needs at least one media file".into()));
    }
    let mut assets = Vec::new();
    let mut media_hashes = Vec::new();
    for file in files {
        let path = file.as_ref();
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let ext: String = path
            .extension()
            .map(|e| e.to_string_lossy().chars().filter(char::is_ascii_alphanumeric).collect())
            .filter(|e: &String| !e.is_empty())
            .unwrap_or_else(|| "bin".into());
        let r = store.put_with_ext(project_id, &ArtifactKind::media(&stem), &bytes, &ext)?;
        assets.push(probe(store, &r.uri, engine)?);
        media_hashes.push(r.hash);
    }
    let project = Project {
        project_id: project_id.to_string(),
        assets,
        media_hashes,
        created_at: clock.now_rfc3339(),
    };
    store.put_json(project_id, &ArtifactKind::project(), &project)?;
    Ok(project)
}

pub fn load_project(store: &ArtifactStore, project_id: &str) -> Result<Project> {
    let r = store
        .latest(project_id, &ArtifactKind::project())
        .map_err(|_| Error::NotFound(format!("project {project_id}")))?;
    store.get_json(&r)
}
