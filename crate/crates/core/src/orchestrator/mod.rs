//! Durable, checkpointed workflow execution.
//!
//! A workflow is a definition (`comprehend`, `qa`, `edit`) driven over named
//! activities. Every attempt is appended to the [`WorkflowRecord`], which is
//! persisted through the artifact store after each change. An activity's
//! input hash covers its name, the config snapshot, the workflow params and
//! its predecessors' output hashes; on resume, an activity whose input hash
//! matches a completed entry is not run again and its checkpointed output is
//! read back instead.

mod definitions;
mod project;
mod record;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use definitions::{EditResult, DEFINITIONS};
pub use project::{create_project, load_project};
pub use record::{ActivityEntry, ActivityError, Failure, WorkflowRecord, WorkflowStatus};

use crate::canonical::{digest_parts, to_canonical_bytes};
use crate::clock::{Clock, SystemClock};
use crate::config::PipelineConfig;
use crate::edit::{BeatDetector, MusicManifest, Synthesizer, SyntheticSynthesizer, Transcriber};
use crate::error::{Error, ErrorClass, Result};
use crate::exec::ExecMode;
use crate::gateway::Gateway;
use crate::media::{MediaEngine, NullEngine};
use crate::model::SCHEMA_VERSION;
use crate::store::{ArtifactKind, ArtifactRef, ArtifactStore};

/// Key prefix mapping workflow ids to their project.
const REGISTRY: &str = ".registry/workflows";

/// Retry behaviour for a single activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles for each further attempt.
    pub backoff_base: Duration,
    pub retryable: Vec<ErrorClass>,
}

impl RetryPolicy {
    pub fn new(max_attempts: u32) -> Self {
        Self {
            max_attempts: max_attempts.max(1),
            backoff_base: Duration::from_secs(1),
            retryable: vec![ErrorClass::Provider, ErrorClass::Engine, ErrorClass::Store],
        }
    }

    /// Same policy without waiting between attempts.
    pub fn immediate(mut self) -> Self {
        self.backoff_base = Duration::ZERO;
        self
    }

    pub fn backoff(&self, failed_attempt: u32) -> Duration {
        self.backoff_base * 2u32.saturating_pow(failed_attempt.saturating_sub(1))
    }

    pub fn is_retryable(&self, e: &Error) -> bool {
        self.retryable.contains(&e.class())
    }
}

/// Faults injected into runs, for testing durability.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    /// Simulate a crash once this many activities have completed in a run.
    pub kill_after: Option<usize>,
    /// Fail the first `n` attempts of an activity with an error of `class`.
    pub failures: BTreeMap<String, (u32, ErrorClass)>,
}

impl FaultPlan {
    pub fn kill_after(n: usize) -> Self {
        Self {
            kill_after: Some(n),
            ..Self::default()
        }
    }

    pub fn fail(mut self, activity: &str, times: u32, class: ErrorClass) -> Self {
        self.failures.insert(activity.to_string(), (times, class));
        self
    }

    fn injected(&self, activity: &str, attempt: u32) -> Option<Error> {
        let (times, class) = self.failures.get(activity)?;
        if attempt > *times {
            return None;
        }
        let msg = format!("injected fault in {activity} (attempt {attempt})");
        Some(match class {
            ErrorClass::Provider => Error::Provider(msg),
            ErrorClass::Engine => Error::Engine {
                tool: "fault".into(),
                diagnostics: msg,
            },
            ErrorClass::Store => Error::Store(msg),
            ErrorClass::Precondition => Error::Precondition(msg),
            ErrorClass::NotFound => Error::NotFound(msg),
            ErrorClass::Validation | ErrorClass::Other => {
                let mut r = crate::validate::ValidationReport::default();
                r.push(activity, msg);
                Error::Validation(r)
            }
        })
    }
}

/// Adapters and settings shared by every workflow.
#[derive(Clone)]
pub struct Services {
    pub store: ArtifactStore,
    pub gateway: Gateway,
    pub engine: Arc<dyn MediaEngine>,
    pub synthesizer: Arc<dyn Synthesizer>,
    pub transcriber: Option<Arc<dyn Transcriber>>,
    pub beats: Option<Arc<dyn BeatDetector>>,
    pub music: Option<MusicManifest>,
    pub clock: Arc<dyn Clock>,
    pub config: PipelineConfig,
    pub mode: ExecMode,
    /// Size of the pool parallel fan-outs run on.
    pub workers: usize,
}

impl Services {
    pub fn new(store: ArtifactStore, gateway: Gateway) -> Self {
        Self {
            store,
            gateway,
            engine: Arc::new(NullEngine),
            synthesizer: Arc::new(SyntheticSynthesizer::default()),
            transcriber: None,
            beats: None,
            music: None,
            clock: Arc::new(SystemClock),
            config: PipelineConfig::default(),
            mode: ExecMode::default(),
            workers: 4,
        }
    }
}

/// Runs workflows and keeps handles to the ones started in the background.
#[derive(Clone)]
pub struct Orchestrator {
    services: Arc<Services>,
    policy: RetryPolicy,
    faults: Arc<Mutex<FaultPlan>>,
    handles: Arc<Mutex<HashMap<String, JoinHandle<Result<WorkflowRecord>>>>>,
    admission: Arc<Mutex<()>>,
}

impl std::fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orchestrator").field("policy", &self.policy).finish_non_exhaustive()
    }
}

impl Orchestrator {
    pub fn new(services: Services) -> Self {
        let policy = RetryPolicy::new(services.config.retry_limit);
        Self {
            services: Arc::new(services),
            policy,
            faults: Arc::default(),
            handles: Arc::default(),
            admission: Arc::default(),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn services(&self) -> &Services {
        &self.services
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.services.store
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    /// Faults applied to runs started or resumed from now on.
    pub fn set_faults(&self, faults: FaultPlan) {
        *self.faults.lock().expect("fault plan poisoned") = faults;
    }

    /// Creates and persists a `Running` record without executing it. With
    /// `exclusive`, a running workflow with the same definition and input is
    /// a [`Error::Conflict`].
    fn admit(
        &self,
        project: &str,
        definition: &str,
        params: BTreeMap<String, String>,
        exclusive: bool,
    ) -> Result<WorkflowRecord> {
        if !DEFINITIONS.contains(&definition) {
            return Err(Error::Definition(definition.to_string()));
        }
        let proj = load_project(&self.services.store, project)?;
        let params = definitions::check_params(&self.services.store, project, definition, params)?;
        let config = definitions::config_for(&self.services.config, definition, &params);
        let media_hash = proj.media_hashes.first().cloned().unwrap_or_default();
        let input_hash = digest_parts([
            definition.as_bytes(),
            &to_canonical_bytes(&params)?,
            &to_canonical_bytes(&config)?,
            media_hash.as_bytes(),
        ]);
        let _admission = self.admission.lock().expect("admission lock poisoned");
        for existing in self.records(project)?.into_iter().filter(|_| exclusive) {
            if existing.status == WorkflowStatus::Running
                && existing.definition == definition
                && existing.input_hash == input_hash
            {
                return Err(Error::Conflict(format!(
                    "workflow {} is already running `{definition}` with the same input",
                    existing.workflow_id
                )));
            }
        }
        let now = self.services.clock.now_rfc3339();
        let record = WorkflowRecord {
            schema_version: SCHEMA_VERSION,
            workflow_id: format!("wf{}", &uuid::Uuid::new_v4().simple().to_string()[..16]),
            project_id: project.to_string(),
            definition: definition.to_string(),
            status: WorkflowStatus::Running,
            params,
            config,
            media_hash,
            input_hash,
            planned: definitions::initial_plan(definition),
            activities: Vec::new(),
            cursor: 0,
            result: None,
            failure: None,
            created_at: now.clone(),
            updated_at: now,
        };
        self.services.store.objects().put(
            &format!("{REGISTRY}/{}", record.workflow_id),
            record.project_id.as_bytes(),
        )?;
        self.persist(&record)?;
        Ok(record)
    }

    /// Registers a workflow and runs it on a background thread. Starting the
    /// same definition and input twice yields two independent workflows.
    pub fn start(&self, project: &str, definition: &str, params: BTreeMap<String, String>) -> Result<String> {
        self.spawn(self.admit(project, definition, params, false)?)
    }

    /// Like [`Orchestrator::start`], but refuses with [`Error::Conflict`]
    /// while a workflow with the same definition and input is running.
    pub fn start_exclusive(
        &self,
        project: &str,
        definition: &str,
        params: BTreeMap<String, String>,
    ) -> Result<String> {
        self.spawn(self.admit(project, definition, params, true)?)
    }

    fn spawn(&self, record: WorkflowRecord) -> Result<String> {
        let id = record.workflow_id.clone();
        let this = self.clone();
        let handle = std::thread::spawn(move || this.drive(record));
        self.handles.lock().expect("handle table poisoned").insert(id.clone(), handle);
        Ok(id)
    }

    /// Waits for a workflow started with [`Orchestrator::start`]. For any
    /// other id, returns the persisted record.
    pub fn wait(&self, workflow_id: &str) -> Result<WorkflowRecord> {
        let handle = self.handles.lock().expect("handle table poisoned").remove(workflow_id);
        match handle {
            Some(h) => h.join().map_err(|_| Error::Store(format!("workflow {workflow_id} panicked")))?,
            None => self.record(workflow_id),
        }
    }

    /// Runs a workflow to completion on the calling thread.
    pub fn run(&self, project: &str, definition: &str, params: BTreeMap<String, String>) -> Result<WorkflowRecord> {
        let record = self.admit(project, definition, params, false)?;
        self.drive(record)
    }

    /// Continues a `Running` or `Failed` workflow, skipping completed work.
    pub fn resume(&self, workflow_id: &str) -> Result<WorkflowRecord> {
        if self.handles.lock().expect("handle table poisoned").contains_key(workflow_id) {
            return Err(Error::Conflict(format!("workflow {workflow_id} is still executing")));
        }
        let mut record = self.record(workflow_id)?;
        match record.status {
            WorkflowStatus::Completed => return Ok(record),
            WorkflowStatus::Pending | WorkflowStatus::Running | WorkflowStatus::Failed => {}
        }
        let proj = load_project(&self.services.store, &record.project_id)?;
        let current = proj.media_hashes.first().cloned().unwrap_or_default();
        if current != record.media_hash {
            return Err(Error::HashMismatch(format!(
                "workflow {workflow_id} started from media {} but the project now holds {current}",
                record.media_hash
            )));
        }
        record.status = WorkflowStatus::Running;
        record.failure = None;
        self.persist(&record)?;
        self.drive(record)
    }

    /// One `edit` workflow per prompt, all running concurrently against the
    /// project's current index.
    pub fn fork_variants(&self, project: &str, prompts: &[String]) -> Result<Vec<String>> {
        self.services
            .store
            .latest(project, &ArtifactKind::index())
            .map_err(|_| Error::Precondition(format!("project {project} has no index yet")))?;
        prompts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let params = BTreeMap::from([
                    ("prompt".to_string(), p.clone()),
                    ("variant".to_string(), (i + 1).to_string()),
                ]);
                self.start(project, "edit", params)
            })
            .collect()
    }

    /// Latest persisted state of a workflow.
    pub fn record(&self, workflow_id: &str) -> Result<WorkflowRecord> {
        let key = format!("{REGISTRY}/{workflow_id}");
        let project = match self.services.store.objects().get(&key) {
            Ok(b) => String::from_utf8_lossy(&b).trim().to_string(),
            Err(Error::NotFound(_)) => return Err(Error::NotFound(format!("workflow {workflow_id}"))),
            Err(e) => return Err(e),
        };
        let r = self.services.store.latest(&project, &ArtifactKind::workflow(workflow_id))?;
        self.services.store.get_json(&r)
    }

    /// Every workflow of a project, by id.
    pub fn records(&self, project: &str) -> Result<Vec<WorkflowRecord>> {
        let mut out = Vec::new();
        for r in self.services.store.list_kinds(project)? {
            if r.kind.as_str().starts_with("workflow-") {
                out.push(self.services.store.get_json(&r)?);
            }
        }
        Ok(out)
    }

    fn persist(&self, record: &WorkflowRecord) -> Result<ArtifactRef> {
        self.services
            .store
            .put_json(&record.project_id, &ArtifactKind::workflow(&record.workflow_id), record)
    }

    fn drive(&self, record: WorkflowRecord) -> Result<WorkflowRecord> {
        let faults = self.faults.lock().expect("fault plan poisoned").clone();
        let run = Run {
            orch: self,
            record: Mutex::new(record),
            faults,
            executed: AtomicUsize::new(0),
        };
        let outcome = definitions::execute(&run);
        let mut record = run.record.into_inner().expect("record lock poisoned");
        match outcome {
            Ok(result) => {
                record.result = Some(result);
                record.status = WorkflowStatus::Completed;
                record.recompute_cursor();
                record.updated_at = self.services.clock.now_rfc3339();
                self.persist(&record)?;
                Ok(record)
            }
            Err(Error::Killed(at)) => Err(Error::Killed(at)),
            Err(e) => {
                if record.failure.is_none() {
                    record.failure = Some(Failure {
                        activity: String::new(),
                        attempts: 0,
                        class: e.class(),
                        causes: vec![e.to_string()],
                    });
                }
                record.status = WorkflowStatus::Failed;
                record.updated_at = self.services.clock.now_rfc3339();
                self.persist(&record)?;
                Ok(record)
            }
        }
    }
}

/// Output of a completed activity, with the hash successors depend on.
#[derive(Debug, Clone)]
pub struct Done<T> {
    pub value: T,
    pub output: ArtifactRef,
}

impl<T> Done<T> {
    pub fn hash(&self) -> &str {
        &self.output.hash
    }
}

/// One execution (or resumption) of a workflow.
pub(crate) struct Run<'a> {
    orch: &'a Orchestrator,
    record: Mutex<WorkflowRecord>,
    faults: FaultPlan,
    executed: AtomicUsize,
}

impl Run<'_> {
    pub fn services(&self) -> &Services {
        &self.orch.services
    }

    pub fn workflow_id(&self) -> String {
        self.record.lock().expect("record lock poisoned").workflow_id.clone()
    }

    pub fn project(&self) -> String {
        self.record.lock().expect("record lock poisoned").project_id.clone()
    }

    pub fn params(&self) -> BTreeMap<String, String> {
        self.record.lock().expect("record lock poisoned").params.clone()
    }

    pub fn config(&self) -> PipelineConfig {
        self.record.lock().expect("record lock poisoned").config.clone()
    }

    pub fn media_hash(&self) -> String {
        self.record.lock().expect("record lock poisoned").media_hash.clone()
    }

    /// Adds activities to the plan (once) as a fan-out becomes known.
    pub fn plan(&self, names: &[String]) -> Result<()> {
        let mut rec = self.record.lock().expect("record lock poisoned");
        let mut changed = false;
        for n in names {
            if !rec.planned.contains(n) {
                rec.planned.push(n.clone());
                changed = true;
            }
        }
        if changed {
            rec.recompute_cursor();
            self.orch.persist(&rec)?;
        }
        Ok(())
    }

    fn input_hash(&self, name: &str, inputs: &[&str]) -> Result<String> {
        let (params, config) = {
            let rec = self.record.lock().expect("record lock poisoned");
            (to_canonical_bytes(&rec.params)?, to_canonical_bytes(&rec.config)?)
        };
        let mut parts: Vec<&[u8]> = vec![name.as_bytes(), &params, &config];
        parts.extend(inputs.iter().map(|s| s.as_bytes()));
        Ok(digest_parts(parts))
    }

    /// Runs `f` as activity `name` unless a completed entry with the same
    /// input hash exists, in which case its checkpointed output is loaded.
    /// The output is stored under `kind`.
    pub fn activity<T, F>(&self, name: &str, inputs: &[&str], kind: ArtifactKind, f: F) -> Result<Done<T>>
    where
        T: Serialize + DeserializeOwned,
        F: Fn() -> Result<T>,
    {
        let input_hash = self.input_hash(name, inputs)?;
        let checkpoint = {
            let rec = self.record.lock().expect("record lock poisoned");
            rec.activities
                .iter()
                .rev()
                .find(|a| a.name == name && a.input_hash == input_hash && a.succeeded())
                .and_then(|a| a.output.clone())
        };
        if let Some(output) = checkpoint {
            let value = self.services().store.get_json(&output)?;
            return Ok(Done { value, output });
        }

        let clock = &self.services().clock;
        let policy = &self.orch.policy;
        let project = self.project();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = clock.now();
            let result = match self.faults.injected(name, attempt) {
                Some(e) => Err(e),
                None => f().and_then(|v| {
                    let r = self.services().store.put_json(&project, &kind, &v)?;
                    Ok((v, r))
                }),
            };
            let finished = clock.now();
            let mut entry = ActivityEntry {
                name: name.to_string(),
                attempt,
                input_hash: input_hash.clone(),
                output: None,
                error: None,
                started_at: started.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                finished_at: finished.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                duration_ms: (finished - started).num_milliseconds().max(0) as u64,
            };
            match result {
                Ok((value, output)) => {
                    entry.output = Some(output.clone());
                    self.append(entry, None)?;
                    let n = self.executed.fetch_add(1, Ordering::SeqCst) + 1;
                    if self.faults.kill_after.is_some_and(|k| n >= k) {
                        return Err(Error::Killed(name.to_string()));
                    }
                    return Ok(Done { value, output });
                }
                Err(e) => {
                    entry.error = Some(ActivityError {
                        class: e.class(),
                        message: e.to_string(),
                    });
                    let retry = policy.is_retryable(&e) && attempt < policy.max_attempts;
                    let failure = (!retry).then(|| Failure {
                        activity: name.to_string(),
                        attempts: attempt,
                        class: e.class(),
                        causes: causes(&e, name, attempt),
                    });
                    self.append(entry, failure)?;
                    if !retry {
                        return Err(e);
                    }
                    std::thread::sleep(policy.backoff(attempt));
                }
            }
        }
    }

    fn append(&self, entry: ActivityEntry, failure: Option<Failure>) -> Result<()> {
        let mut rec = self.record.lock().expect("record lock poisoned");
        if !rec.planned.contains(&entry.name) {
            rec.planned.push(entry.name.clone());
        }
        rec.activities.push(entry);
        if failure.is_some() && rec.failure.is_none() {
            rec.failure = failure;
        }
        rec.recompute_cursor();
        rec.updated_at = self.services().clock.now_rfc3339();
        self.orch.persist(&rec)?;
        Ok(())
    }

    /// Kind for intermediate outputs private to this workflow.
    pub fn scratch_kind(&self, name: &str) -> ArtifactKind {
        ArtifactKind::activity(&format!("{}-{name}", self.workflow_id()))
    }
}

fn causes(e: &Error, activity: &str, attempts: u32) -> Vec<String> {
    let mut chain = vec![format!("activity {activity} failed after {attempts} attempt(s)")];
    chain.push(e.to_string());
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        chain.push(s.to_string());
        source = s.source();
    }
    chain
}
