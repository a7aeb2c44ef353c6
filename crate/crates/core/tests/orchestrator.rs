use std::collections::BTreeMap;

use reelmind_core::clock::FixedClock;
use reelmind_core::config::PipelineConfig;
use reelmind_core::exec::ExecMode;
use reelmind_core::media::{synthetic::SyntheticMedia, NullEngine};
use reelmind_core::model::{EditPlan, NarrativeIndex};
use reelmind_core::orchestrator::{create_project, EditResult, FaultPlan, WorkflowRecord, WorkflowStatus};
use reelmind_core::testkit::{Story, StoryBench};
use reelmind_core::time::Timestamp;
use reelmind_core::validate::Validate;
use reelmind_core::Error;

fn bench(dir: &std::path::Path, secs: u64) -> StoryBench {
    StoryBench::new(dir, "demo", Timestamp::from_secs(secs), Story::noir(), PipelineConfig::default()).unwrap()
}

fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn names(record: &WorkflowRecord) -> Vec<&str> {
    record.activities.iter().map(|a| a.name.as_str()).collect()
}

#[test]
fn comprehend_log_follows_the_dag() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 1200);
    let record = b.comprehend(true).unwrap();
    assert_eq!(record.status, WorkflowStatus::Completed);
    assert!(record.validate().is_empty(), "{}", record.validate());
    let log = names(&record);
    assert_eq!(&log[..2], ["probe", "plan_segments"]);
    assert!(log[2].starts_with("extract"));
    let pos = |n: &str| log.iter().position(|x| *x == n).unwrap();
    assert!(pos("bootstrap") < pos("comprehend_segment:0"));
    assert!(pos("comprehend_segment:1") < pos("scaffold"));
    assert!(pos("scaffold") < pos("scene:s001"));
    assert!(pos("scene:s004") < pos("refine"));
    assert_eq!(log.last(), Some(&"refine"));
    assert_eq!(record.percent_complete(), 100);
    assert_eq!(record.cursor, record.planned.len());
}

#[test]
fn unknown_definition_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    let e = b.orchestrator.start(&b.project, "transcode", BTreeMap::new()).unwrap_err();
    assert!(matches!(e, Error::Definition(ref d) if d == "transcode"), "{e}");
}

#[test]
fn unknown_project_and_workflow_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    assert!(matches!(
        b.orchestrator.start("nope", "comprehend", BTreeMap::new()),
        Err(Error::NotFound(_))
    ));
    assert!(matches!(b.orchestrator.record("wf0000"), Err(Error::NotFound(_))));
    assert!(matches!(b.orchestrator.resume("wf0000"), Err(Error::NotFound(_))));
}

#[test]
fn qa_and_edit_need_params_and_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    assert!(matches!(b.ask("When does Mara doubt?"), Err(Error::Precondition(_))));
    b.comprehend(true).unwrap();
    match b.orchestrator.run(&b.project, "edit", params(&[("prompt", "  ")])) {
        Err(Error::Validation(r)) => assert_eq!(r.violations[0].path, "params.prompt"),
        other => panic!("expected validation error, got {other:?}"),
    }
    assert!(matches!(
        b.orchestrator.run(&b.project, "qa", BTreeMap::new()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn start_twice_gives_independent_concurrent_workflows() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    let p = params(&[("refine", "true")]);
    let a = b.orchestrator.start(&b.project, "comprehend", p.clone()).unwrap();
    let c = b.orchestrator.start(&b.project, "comprehend", p).unwrap();
    assert_ne!(a, c);
    let ra = b.orchestrator.wait(&a).unwrap();
    let rc = b.orchestrator.wait(&c).unwrap();
    assert_eq!(ra.status, WorkflowStatus::Completed);
    assert_eq!(rc.status, WorkflowStatus::Completed);
    let ia = b.store().get_artifact(ra.result.as_ref().unwrap()).unwrap();
    let ic = b.store().get_artifact(rc.result.as_ref().unwrap()).unwrap();
    assert_eq!(ia, ic);
}

#[test]
fn exclusive_start_conflicts_with_a_running_duplicate() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    b.orchestrator.set_faults(FaultPlan::kill_after(2));
    assert!(matches!(b.comprehend(true), Err(Error::Killed(_))));
    b.orchestrator.set_faults(FaultPlan::default());
    let e = b
        .orchestrator
        .start_exclusive(&b.project, "comprehend", params(&[("refine", "true")]))
        .unwrap_err();
    assert!(matches!(e, Error::Conflict(_)), "{e}");
    // A different input is not a duplicate.
    let id = b
        .orchestrator
        .start_exclusive(&b.project, "comprehend", params(&[("refine", "false")]))
        .unwrap();
    assert_eq!(b.orchestrator.wait(&id).unwrap().status, WorkflowStatus::Completed);
}

#[test]
fn provider_faults_retry_then_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    b.orchestrator.set_faults(FaultPlan::default().fail(
        "bootstrap",
        2,
        reelmind_core::ErrorClass::Provider,
    ));
    let r = b.comprehend(true).unwrap();
    assert_eq!(r.status, WorkflowStatus::Completed);
    assert_eq!(r.attempts_of("bootstrap"), 3);
    let errors: Vec<_> = r.activities.iter().filter(|a| a.name == "bootstrap" && !a.succeeded()).collect();
    assert_eq!(errors.len(), 2);
    assert!(errors.iter().all(|a| a.error.as_ref().unwrap().message.contains("injected")));
}

#[test]
fn exhausted_retries_fail_with_cause_and_resume_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    b.orchestrator
        .set_faults(FaultPlan::default().fail("scaffold", 3, reelmind_core::ErrorClass::Store));
    let failed = b.comprehend(true).unwrap();
    assert_eq!(failed.status, WorkflowStatus::Failed);
    let f = failed.failure.as_ref().unwrap();
    assert_eq!((f.activity.as_str(), f.attempts), ("scaffold", 3));
    assert!(f.causes.iter().any(|c| c.contains("injected fault in scaffold")));
    assert!(failed.validate().is_empty(), "{}", failed.validate());

    b.orchestrator.set_faults(FaultPlan::default());
    let resumed = b.orchestrator.resume(&failed.workflow_id).unwrap();
    assert_eq!(resumed.status, WorkflowStatus::Completed);
    assert!(failed.is_prefix_of(&resumed));
    let runs = |n: &str| resumed.activities.iter().filter(|a| a.name == n && a.succeeded()).count();
    assert_eq!(runs("bootstrap"), 1);
    assert_eq!(runs("scaffold"), 1);
}

#[test]
fn non_retryable_error_fails_on_first_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    b.orchestrator
        .set_faults(FaultPlan::default().fail("probe", 1, reelmind_core::ErrorClass::Validation));
    let r = b.comprehend(true).unwrap();
    assert_eq!(r.status, WorkflowStatus::Failed);
    assert_eq!(r.attempts_of("probe"), 1);
}

#[test]
fn kill_mid_scene_fan_out_then_resume_skips_finished_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let b = StoryBench::with_mode(
        dir.path(),
        "demo",
        Timestamp::from_secs(1200),
        Story::noir(),
        PipelineConfig::default(),
        ExecMode::Sequential,
    )
    .unwrap();
    // 2 setup + 2 macro + 4 scene extracts + bootstrap + 2 segments + scaffold = 12; two scenes more.
    b.orchestrator.set_faults(FaultPlan::kill_after(14));
    assert!(matches!(b.comprehend(true), Err(Error::Killed(_))));
    b.orchestrator.set_faults(FaultPlan::default());
    let id = b.orchestrator.records(&b.project).unwrap()[0].workflow_id.clone();
    let before = b.orchestrator.record(&id).unwrap();
    assert_eq!(before.status, WorkflowStatus::Running);
    let done_scenes = before.activities.iter().filter(|a| a.name.starts_with("scene:")).count();
    assert_eq!(done_scenes, 2);

    let after = b.orchestrator.resume(&id).unwrap();
    assert_eq!(after.status, WorkflowStatus::Completed);
    assert!(before.is_prefix_of(&after));
    let new_entries = &after.activities[before.activities.len()..];
    for old in &before.activities {
        assert!(new_entries.iter().all(|n| n.name != old.name), "{} re-ran", old.name);
    }
    assert_eq!(new_entries.len(), 3);
}

#[test]
fn parallel_kill_and_resume_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let reference = bench(dir.path(), 1200);
    let expected = reference.comprehend(true).unwrap();
    let expected = reference.store().get_artifact(expected.result.as_ref().unwrap()).unwrap();
    for k in [3, 7, 13, 16] {
        let dir = tempfile::tempdir().unwrap();
        let b = StoryBench::with_mode(
            dir.path(),
            "demo",
            Timestamp::from_secs(1200),
            Story::noir(),
            PipelineConfig::default(),
            ExecMode::Parallel,
        )
        .unwrap();
        b.orchestrator.set_faults(FaultPlan::kill_after(k));
        assert!(matches!(b.comprehend(true), Err(Error::Killed(_))));
        b.orchestrator.set_faults(FaultPlan::default());
        let id = b.orchestrator.records(&b.project).unwrap()[0].workflow_id.clone();
        let r = b.orchestrator.resume(&id).unwrap();
        assert_eq!(r.status, WorkflowStatus::Completed);
        assert_eq!(b.store().get_artifact(r.result.as_ref().unwrap()).unwrap(), expected, "kill at {k}");
    }
}

#[test]
fn resume_of_completed_workflow_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    let done = b.comprehend(true).unwrap();
    let again = b.orchestrator.resume(&done.workflow_id).unwrap();
    assert_eq!(done, again);
}

#[test]
fn resume_refuses_changed_media() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 600);
    b.orchestrator.set_faults(FaultPlan::kill_after(3));
    assert!(matches!(b.comprehend(true), Err(Error::Killed(_))));
    b.orchestrator.set_faults(FaultPlan::default());
    let id = b.orchestrator.records(&b.project).unwrap()[0].workflow_id.clone();

    let other = dir.path().join("media").join("demo.json");
    std::fs::write(&other, SyntheticMedia::video(Timestamp::from_secs(700), 1920, 1080, 24.0).to_bytes()).unwrap();
    create_project(b.store(), "demo", &[&other], &NullEngine, &FixedClock::epoch()).unwrap();
    assert!(matches!(b.orchestrator.resume(&id), Err(Error::HashMismatch(_))));
}

fn plan_bytes(b: &StoryBench, id: &str) -> Vec<u8> {
    let r = b.orchestrator.wait(id).unwrap();
    assert_eq!(r.status, WorkflowStatus::Completed, "{:?}", r.failure);
    let result: EditResult = b.result(&r).unwrap();
    b.store().get_artifact(&result.plan).unwrap()
}

#[test]
fn fork_variants_cardinality_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 2400);
    let prompts = |p: &[&str]| p.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    assert!(matches!(
        b.orchestrator.fork_variants(&b.project, &prompts(&["x"])),
        Err(Error::Precondition(_))
    ));
    b.comprehend(true).unwrap();
    assert!(b.orchestrator.fork_variants(&b.project, &[]).unwrap().is_empty());

    let ids = b
        .orchestrator
        .fork_variants(
            &b.project,
            &prompts(&["A tense recap", "Mara's side of the story", "Everything about the ledger"]),
        )
        .unwrap();
    assert_eq!(ids.len(), 3);
    let plans: Vec<Vec<u8>> = ids.iter().map(|id| plan_bytes(&b, id)).collect();
    assert_ne!(plans[0], plans[1]);
    assert_ne!(plans[1], plans[2]);
    assert_ne!(plans[0], plans[2]);
    for p in &plans {
        let plan: EditPlan = serde_json::from_slice(p).unwrap();
        assert!(plan.validate().is_empty());
    }

    let twins = b
        .orchestrator
        .fork_variants(&b.project, &prompts(&["Crane's rise and fall", "Crane's rise and fall"]))
        .unwrap();
    assert_eq!(plan_bytes(&b, &twins[0]), plan_bytes(&b, &twins[1]));
}

#[test]
fn no_refine_param_disables_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path(), 1200);
    let r = b.comprehend(false).unwrap();
    assert!(!r.config.refinement_enabled);
    assert!(!r.activities.is_empty());
    let index: NarrativeIndex = b.result(&r).unwrap();
    assert!(!index.meta.refinement_enabled);
    assert!(index.unattributed_count() > 0);
}
