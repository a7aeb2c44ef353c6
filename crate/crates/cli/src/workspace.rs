//! Wiring from environment settings to a store and per-project orchestrators.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use reelmind_core::clock::{Clock, SystemClock};
use reelmind_core::config::PipelineConfig;
use reelmind_core::exec::ExecMode;
use reelmind_core::gateway::{Gateway, HttpProvider, ModelProvider, UnavailableProvider};
use reelmind_core::media::{CommandEngine, MediaEngine, NullEngine};
use reelmind_core::model::Project;
use reelmind_core::orchestrator::{create_project, load_project, Orchestrator, Services, WorkflowRecord};
use reelmind_core::store::ArtifactStore;
use reelmind_core::testkit::Story;
use reelmind_core::{Error, Result};

pub const ENV_STORE_ROOT: &str = "STORE_ROOT";
pub const ENV_ENGINE_TEMPLATE: &str = "ENGINE_CMD_TEMPLATE";
const DEFAULT_STORE_ROOT: &str = "reelmind-store";

/// Where model completions come from.
#[derive(Clone)]
pub enum ProviderSource {
    /// A remote endpoint shared by every project.
    Remote(Arc<dyn ModelProvider>),
    /// The offline story mock, sized to each project's media.
    Story,
}

#[derive(Clone)]
pub struct Settings {
    pub store_root: PathBuf,
    pub provider: ProviderSource,
    pub engine: Arc<dyn MediaEngine>,
    pub clock: Arc<dyn Clock>,
    pub config: PipelineConfig,
    pub mode: ExecMode,
}

impl Settings {
    /// `STORE_ROOT`, `PROVIDER_*` and `ENGINE_CMD_TEMPLATE`. Without a
    /// provider URL the offline mock answers; without a template the
    /// manifest-only engine runs.
    pub fn from_env() -> Self {
        let store_root = std::env::var_os(ENV_STORE_ROOT)
            .filter(|v| !v.is_empty())
            .map_or_else(|| PathBuf::from(DEFAULT_STORE_ROOT), PathBuf::from);
        let provider = match HttpProvider::from_env() {
            Some(p) => ProviderSource::Remote(Arc::new(p)),
            None => ProviderSource::Story,
        };
        let engine: Arc<dyn MediaEngine> = match std::env::var(ENV_ENGINE_TEMPLATE) {
            Ok(t) if !t.trim().is_empty() => Arc::new(CommandEngine::from_template(&t)),
            _ => Arc::new(NullEngine),
        };
        Self::new(store_root, provider, engine)
    }

    pub fn new(store_root: impl Into<PathBuf>, provider: ProviderSource, engine: Arc<dyn MediaEngine>) -> Self {
        Self {
            store_root: store_root.into(),
            provider,
            engine,
            clock: Arc::new(SystemClock),
            config: PipelineConfig::default(),
            mode: ExecMode::default(),
        }
    }
}

/// A store plus one orchestrator per project, rebuilt when the project's
/// media changes.
pub struct Workspace {
    settings: Settings,
    store: ArtifactStore,
    lookup: Orchestrator,
    projects: Mutex<HashMap<String, (String, Orchestrator)>>,
}

impl Workspace {
    pub fn open(settings: Settings) -> Result<Self> {
        let store = ArtifactStore::open_fs(&settings.store_root)?;
        let lookup = Orchestrator::new(Services::new(
            store.clone(),
            Gateway::new(Arc::new(UnavailableProvider), 0),
        ));
        Ok(Self {
            settings,
            store,
            lookup,
            projects: Mutex::default(),
        })
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Copies and probes `paths` into `project`.
    pub fn ingest(&self, project: &str, paths: &[PathBuf]) -> Result<Project> {
        create_project(&self.store, project, paths, self.settings.engine.as_ref(), self.settings.clock.as_ref())
    }

    pub fn project(&self, project: &str) -> Result<Project> {
        load_project(&self.store, project)
    }

    pub fn orchestrator(&self, project: &str) -> Result<Orchestrator> {
        let proj = self.project(project)?;
        let media_hash = proj.media_hashes.first().cloned().unwrap_or_default();
        let mut projects = self.projects.lock().expect("project table poisoned");
        if let Some((hash, orch)) = projects.get(project) {
            if *hash == media_hash {
                return Ok(orch.clone());
            }
        }
        let provider: Arc<dyn ModelProvider> = match &self.settings.provider {
            ProviderSource::Remote(p) => p.clone(),
            ProviderSource::Story => {
                let duration = proj.primary().map(|a| a.duration).unwrap_or_default();
                Arc::new(Story::noir().provider(duration))
            }
        };
        let config = self.settings.config.clone();
        let services = Services {
            engine: self.settings.engine.clone(),
            clock: self.settings.clock.clone(),
            mode: self.settings.mode,
            config: config.clone(),
            ..Services::new(self.store.clone(), Gateway::new(provider, config.repair_attempts))
        };
        let orch = Orchestrator::new(services);
        projects.insert(project.to_string(), (media_hash, orch.clone()));
        Ok(orch)
    }

    pub fn record(&self, workflow_id: &str) -> Result<WorkflowRecord> {
        self.lookup.record(workflow_id)
    }

    /// Blocks until the workflow finishes when it runs in this process;
    /// otherwise returns its persisted state.
    pub fn wait(&self, workflow_id: &str) -> Result<WorkflowRecord> {
        let record = self.record(workflow_id)?;
        self.orchestrator(&record.project_id)?.wait(workflow_id)
    }

    pub fn resume(&self, workflow_id: &str) -> Result<WorkflowRecord> {
        let record = self.record(workflow_id)?;
        self.orchestrator(&record.project_id)?.resume(workflow_id)
    }
}

/// Project id derived from the first media file name.
pub fn default_project_id(paths: &[PathBuf]) -> Result<String> {
    let stem = paths
        .first()
        .and_then(|p| Path::new(p).file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Precondition("ingest needs at least one media file".into()))?;
    let id: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    Ok(id.trim_matches('-').to_string())
}
