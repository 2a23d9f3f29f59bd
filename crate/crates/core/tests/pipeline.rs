use std::fs;
use std::path::Path;

use chrono::Duration;
use topiclens::ingest::CaptureConfig;
use topiclens::pipeline::{run_pipeline, run_until, Manifest, RunConfig, Stage, StageStatus, WorkDir};
use topiclens::synth::{write_corpus, SynthSpec};

fn small_spec() -> SynthSpec {
    let mut spec = SynthSpec::two_party(4, 150, 30, 17);
    spec.hashtags_per_topic = 12;
    spec.unaffiliated_users = 20;
    spec
}

fn setup(dir: &Path) -> RunConfig {
    let spec = small_spec();
    let files = write_corpus(&spec, &dir.join("input")).unwrap();
    let capture = CaptureConfig::new(spec.start, spec.start + Duration::days(i64::from(spec.days) - 1));
    RunConfig::new(capture, files.tweets, files.roster, Some(files.follows))
}

#[test]
fn rerun_reuses_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let work = dir.path().join("work");
    let first = run_pipeline(&config, &work).unwrap();
    assert!(first.stages.iter().all(|(_, s)| *s == StageStatus::Computed));
    let second = run_pipeline(&config, &work).unwrap();
    assert_eq!(second.stages.len(), Stage::ALL.len());
    assert!(second.stages.iter().all(|(_, s)| *s == StageStatus::Reused));
}

#[test]
fn graph_setting_change_recomputes_downstream_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path());
    let work = dir.path().join("work");
    run_pipeline(&config, &work).unwrap();
    config.graph.min_weight = 6;
    let summary = run_pipeline(&config, &work).unwrap();
    for (stage, status) in summary.stages {
        let expected = if stage < Stage::Graph { StageStatus::Reused } else { StageStatus::Computed };
        assert_eq!(status, expected, "{}", stage.name());
    }
}

#[test]
fn tampered_artifact_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let work = dir.path().join("work");
    run_until(&config, &work, Stage::Topics).unwrap();
    let manifest = Manifest::load(&WorkDir::new(&work));
    let (file, _) = manifest.stages[&Stage::Graph].artifacts.iter().next().unwrap();
    fs::write(work.join(file), "garbage").unwrap();
    let summary = run_until(&config, &work, Stage::Topics).unwrap();
    assert_eq!(summary.status(Stage::Ingest), Some(StageStatus::Reused));
    assert_eq!(summary.status(Stage::Graph), Some(StageStatus::Computed));
}

#[test]
fn missing_roster_names_the_affiliate_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path());
    config.inputs.roster = dir.path().join("nowhere.csv");
    let err = run_pipeline(&config, &dir.path().join("work")).unwrap_err();
    assert!(err.to_string().contains("`affiliate`"), "{err}");
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let a = run_pipeline(&config, &dir.path().join("a")).unwrap();
    let b = run_pipeline(&config, &dir.path().join("b")).unwrap();
    assert_eq!(a.manifest, b.manifest);
}

#[test]
fn full_run_emits_every_report_family() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let work = dir.path().join("work");
    run_pipeline(&config, &work).unwrap();
    let report = WorkDir::new(&work).stage(Stage::Report);
    let names: Vec<String> = fs::read_dir(&report)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for expected in ["similarity_long.csv", "similarity_wide.csv", "similarity.svg"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }
    for suffix in ["_usage.csv", "_rolling.svg", "_cumulative.svg", "_coreness.csv", "_coreness.svg"] {
        assert!(names.iter().any(|n| n.ends_with(suffix)), "missing *{suffix} in {names:?}");
    }
    let wide = fs::read_to_string(report.join("similarity_wide.csv")).unwrap();
    assert_eq!(wide.lines().next().unwrap(), "date,self_A,self_B,cross_A_B");
    let political = fs::read_to_string(WorkDir::new(&work).stage(Stage::Graph).join("political.csv")).unwrap();
    assert!(political.starts_with("tag,users,users_A,users_B,share_A,share_B,dkl_bits,political"));
}
