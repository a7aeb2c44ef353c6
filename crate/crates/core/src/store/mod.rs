//! Content-addressed, append-only project artifact store.
//!
//! On-disk layout under the store root:
//!
//! ```text
//! <project>/
//!   media/      source containers and the project manifest
//!   segments/   downsampled segment artifacts
//!   artifacts/  scratchpads, scaffold, scene traces
//!   index/      narrative index versions
//!   plans/      storyboards, narration, edit plans, render graphs, answers
//!   renders/    rendered outputs and render manifests
//!   workflows/  workflow records
//! ```
//!
//! Every artifact is stored as `<area>/<kind>-<sha256>.<ext>`. For each kind,
//! `<kind>.versions` is an append-only log of `<version> <file>` lines and
//! `<kind>.latest` names the newest file.

mod object;

use std::fmt;
use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use object::{FsObjectStore, ObjectStore, StoreLock};

use crate::canonical::{from_json_bytes, sha256_hex, to_canonical_bytes};
use crate::error::{Error, Result};
use crate::validate::{validate_bytes, SchemaKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Area {
    Media,
    Segments,
    Artifacts,
    Index,
    Plans,
    Renders,
    Workflows,
}

impl Area {
    pub const ALL: [Area; 7] = [
        Area::Media,
        Area::Segments,
        Area::Artifacts,
        Area::Index,
        Area::Plans,
        Area::Renders,
        Area::Workflows,
    ];

    pub fn dir(self) -> &'static str {
        match self {
            Area::Media => "media",
            Area::Segments => "segments",
            Area::Artifacts => "artifacts",
            Area::Index => "index",
            Area::Plans => "plans",
            Area::Renders => "renders",
            Area::Workflows => "workflows",
        }
    }
}

/// Artifact kind name, e.g. `index`, `plan`, `trace-s003`, `workflow-<id>`.
///
/// The kind determines the area it lives in and whether a schema is enforced
/// on write.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct ArtifactKind(String);

impl ArtifactKind {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let ok = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !name.starts_with('.');
        if !ok {
            return Err(Error::Precondition(format!("invalid artifact kind {name:?}")));
        }
        Ok(Self(name))
    }

    fn fixed(name: &str) -> Self {
        Self(name.to_string())
    }

    fn tagged(prefix: &str, tag: &str) -> Self {
        let tag: String = tag
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        Self(format!("{prefix}-{tag}"))
    }

    pub fn project() -> Self {
        Self::fixed("project")
    }
    pub fn index() -> Self {
        Self::fixed("index")
    }
    pub fn plan() -> Self {
        Self::fixed("plan")
    }
    pub fn storyboard() -> Self {
        Self::fixed("storyboard")
    }
    pub fn narration() -> Self {
        Self::fixed("narration")
    }
    pub fn scaffold() -> Self {
        Self::fixed("scaffold")
    }
    pub fn answer() -> Self {
        Self::fixed("answer")
    }
    pub fn render() -> Self {
        Self::fixed("render")
    }
    pub fn media(asset_id: &str) -> Self {
        Self::tagged("media", asset_id)
    }
    pub fn trace(scene_id: &str) -> Self {
        Self::tagged("trace", scene_id)
    }
    pub fn workflow(workflow_id: &str) -> Self {
        Self::tagged("workflow", workflow_id)
    }
    /// Intermediate activity output that has no dedicated kind.
    pub fn activity(name: &str) -> Self {
        Self::tagged("activity", name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn stem(&self) -> &str {
        self.0.split('-').next().unwrap_or(&self.0)
    }

    pub fn area(&self) -> Area {
        match self.stem() {
            "project" | "media" => Area::Media,
            "segment" | "segments" => Area::Segments,
            "index" => Area::Index,
            "plan" | "storyboard" | "narration" | "subtitles" | "graph" | "answer" | "selections" => {
                Area::Plans
            }
            "render" => Area::Renders,
            "workflow" => Area::Workflows,
            _ => Area::Artifacts,
        }
    }

    pub fn schema(&self) -> Option<SchemaKind> {
        match self.0.as_str() {
            "index" => Some(SchemaKind::NarrativeIndex),
            "plan" => Some(SchemaKind::EditPlan),
            _ if self.stem() == "workflow" => Some(SchemaKind::WorkflowRecord),
            _ => None,
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for ArtifactKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct ArtifactRef {
    pub project: String,
    pub kind: ArtifactKind,
    /// Object-store key of the blob.
    pub uri: String,
    /// Hex SHA-256 of the blob.
    pub hash: String,
}

#[derive(Clone)]
pub struct ArtifactStore {
    objects: Arc<dyn ObjectStore>,
}

impl fmt::Debug for ArtifactStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArtifactStore").finish_non_exhaustive()
    }
}

fn check_project(project: &str) -> Result<()> {
    let ok = !project.is_empty()
        && !project.starts_with('.')
        && project
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(format!("invalid project id {project:?}")))
    }
}

impl ArtifactStore {
    pub fn new(objects: Arc<dyn ObjectStore>) -> Self {
        Self { objects }
    }

    pub fn open_fs(root: impl Into<std::path::PathBuf>) -> Result<Self> {
        Ok(Self::new(Arc::new(FsObjectStore::new(root)?)))
    }

    pub fn objects(&self) -> &Arc<dyn ObjectStore> {
        &self.objects
    }

    fn kind_prefix(project: &str, kind: &ArtifactKind) -> String {
        format!("{project}/{}/{kind}", kind.area().dir())
    }

    /// Stores `bytes` as the newest version of `kind` with a `.json` extension.
    pub fn put_artifact(&self, project: &str, kind: &ArtifactKind, bytes: &[u8]) -> Result<ArtifactRef> {
        self.put_with_ext(project, kind, bytes, "json")
    }

    /// Stores non-JSON content (media, audio, renders) under the given extension.
    pub fn put_with_ext(
        &self,
        project: &str,
        kind: &ArtifactKind,
        bytes: &[u8],
        ext: &str,
    ) -> Result<ArtifactRef> {
        check_project(project)?;
        if !ext.chars().all(|c| c.is_ascii_alphanumeric()) || ext.is_empty() {
            return Err(Error::Precondition(format!("invalid extension {ext:?}")));
        }
        if let Some(schema) = kind.schema() {
            validate_bytes(schema, bytes)?.into_result()?;
        }
        let hash = sha256_hex(bytes);
        let prefix = Self::kind_prefix(project, kind);
        let uri = format!("{prefix}-{hash}.{ext}");
        if !self.objects.exists(&uri) {
            self.objects.put(&uri, bytes)?;
        }
        let _guard = self.objects.lock(&prefix)?;
        let versions = self.read_versions(project, kind)?;
        let file = uri.rsplit('/').next().expect("uri has a file name").to_string();
        if versions.last().map(|(_, f)| f) != Some(&file) {
            let next = versions.last().map_or(1, |(v, _)| v + 1);
            self.objects
                .append(&format!("{prefix}.versions"), format!("{next} {file}\n").as_bytes())?;
            self.objects.put(&format!("{prefix}.latest"), format!("{file}\n").as_bytes())?;
        }
        Ok(ArtifactRef {
            project: project.to_string(),
            kind: kind.clone(),
            uri,
            hash,
        })
    }

    /// Serializes `value` canonically and stores it.
    pub fn put_json<T: Serialize>(&self, project: &str, kind: &ArtifactKind, value: &T) -> Result<ArtifactRef> {
        self.put_artifact(project, kind, &to_canonical_bytes(value)?)
    }

    /// Reads an artifact and verifies its digest.
    pub fn get_artifact(&self, r: &ArtifactRef) -> Result<Vec<u8>> {
        let bytes = self.objects.get(&r.uri)?;
        let actual = sha256_hex(&bytes);
        if actual != r.hash {
            return Err(Error::Integrity {
                path: self.objects.local_path(&r.uri).unwrap_or_else(|| r.uri.clone().into()),
                expected: r.hash.clone(),
                actual,
            });
        }
        Ok(bytes)
    }

    pub fn get_json<T: serde::de::DeserializeOwned>(&self, r: &ArtifactRef) -> Result<T> {
        from_json_bytes(&self.get_artifact(r)?)
    }

    fn read_versions(&self, project: &str, kind: &ArtifactKind) -> Result<Vec<(u64, String)>> {
        let key = format!("{}.versions", Self::kind_prefix(project, kind));
        let text = match self.objects.get(&key) {
            Ok(b) => String::from_utf8_lossy(&b).into_owned(),
            Err(Error::NotFound(_)) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (v, f) = l
                    .split_once(' ')
                    .ok_or_else(|| Error::Store(format!("corrupt version log {key}")))?;
                let v = v.parse().map_err(|_| Error::Store(format!("corrupt version log {key}")))?;
                Ok((v, f.to_string()))
            })
            .collect()
    }

    fn file_ref(&self, project: &str, kind: &ArtifactKind, file: &str) -> Result<ArtifactRef> {
        let hash = file
            .strip_prefix(&format!("{kind}-"))
            .and_then(|rest| rest.split('.').next())
            .filter(|h| h.len() == 64)
            .ok_or_else(|| Error::Store(format!("malformed artifact file name {file}")))?;
        Ok(ArtifactRef {
            project: project.to_string(),
            kind: kind.clone(),
            uri: format!("{project}/{}/{file}", kind.area().dir()),
            hash: hash.to_string(),
        })
    }

    /// Newest version of `kind` in `project`.
    pub fn latest(&self, project: &str, kind: &ArtifactKind) -> Result<ArtifactRef> {
        check_project(project)?;
        let key = format!("{}.latest", Self::kind_prefix(project, kind));
        let file = match self.objects.get(&key) {
            Ok(b) => String::from_utf8_lossy(&b).trim().to_string(),
            Err(Error::NotFound(_)) => {
                return Err(Error::NotFound(format!("no `{kind}` artifact in project {project}")))
            }
            Err(e) => return Err(e),
        };
        self.file_ref(project, kind, &file)
    }

    /// Every version of `kind`, oldest first.
    pub fn versions(&self, project: &str, kind: &ArtifactKind) -> Result<Vec<ArtifactRef>> {
        check_project(project)?;
        self.read_versions(project, kind)?
            .iter()
            .map(|(_, f)| self.file_ref(project, kind, f))
            .collect()
    }

    /// Latest ref of every kind in the project, sorted by kind name.
    pub fn list_kinds(&self, project: &str) -> Result<Vec<ArtifactRef>> {
        check_project(project)?;
        let mut out = Vec::new();
        for area in Area::ALL {
            for key in self.objects.list(&format!("{project}/{}", area.dir()))? {
                if let Some(name) = key.rsplit('/').next().and_then(|f| f.strip_suffix(".latest")) {
                    out.push(self.latest(project, &ArtifactKind::new(name)?)?);
                }
            }
        }
        out.sort_by(|a, b| a.kind.cmp(&b.kind));
        Ok(out)
    }

    pub fn project_exists(&self, project: &str) -> bool {
        self.latest(project, &ArtifactKind::project()).is_ok()
    }

    pub fn local_path(&self, r: &ArtifactRef) -> Option<std::path::PathBuf> {
        self.objects.local_path(&r.uri)
    }
}
