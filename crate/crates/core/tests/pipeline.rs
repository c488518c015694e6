mod common;

use std::path::Path;

use common::*;
use scene_agents::agents::{EndpointConfig, LoopConfig};
use scene_agents::constraints::evaluate;
use scene_agents::constraints::parse_constraints;
use scene_agents::env::{replay, EpisodeLog};
use scene_agents::geometry::GeometryParams;
use scene_agents::pipeline::{run_pipeline, DatasetManifest, PipelineConfig, PipelineError, Status, MANIFEST_FILE};
use scene_agents::scene::parse_scene;

const GOAL: &str = "A {room_type}, where doors are blocked with large objects.";

fn config(scenes: &Path, transcripts: &Path, out: &Path, jobs: usize) -> PipelineConfig {
    PipelineConfig {
        scenes_dir: scenes.to_path_buf(),
        goal_template: GOAL.into(),
        out_dir: out.to_path_buf(),
        batch: true,
        evaluator: EndpointConfig::mock(transcripts),
        editor: EndpointConfig::mock(transcripts),
        jobs,
        seed: 3,
        loop_config: LoopConfig::default(),
    }
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != MANIFEST_FILE {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn batch_over_fixtures_produces_a_complete_dataset() {
    let out = tempfile::tempdir().unwrap();
    let cfg = config(&fixtures().join("scenes"), &fixtures().join("transcripts"), out.path(), 2);
    let manifest = run_pipeline(&cfg).unwrap();
    assert_eq!(manifest.records.len(), FIXTURE_STEMS.len());
    let stems: Vec<&str> = manifest.records.iter().map(|r| r.stem.as_str()).collect();
    assert_eq!(stems, FIXTURE_STEMS);
    let geo = GeometryParams::default();
    for r in &manifest.records {
        assert_eq!(r.status, Status::Ok, "{}: {:?}", r.stem, r.error);
        assert_eq!(r.goal, GOAL.replace("{room_type}", &r.room_type));
        assert!(r.final_report.as_ref().unwrap().overall_hard_ok);
        for rel in r.renders.iter().chain([r.final_scene.as_ref().unwrap(), r.episode_log.as_ref().unwrap()]) {
            assert!(out.path().join(rel).is_file(), "{rel}");
        }
        // The stored artefacts agree with each other.
        let read = |rel: &Option<String>| std::fs::read_to_string(out.path().join(rel.as_ref().unwrap())).unwrap();
        let g0 = fixture_scene(&r.stem);
        let last = parse_scene(&read(&r.final_scene)).unwrap();
        let log = EpisodeLog::from_jsonl(&read(&r.episode_log)).unwrap();
        assert_eq!(replay(&g0, &log, &log.header().env).unwrap(), last);
        let cs = parse_constraints(&read(&r.constraints)).unwrap();
        assert!(evaluate(&cs, &last, &geo).unwrap().overall_hard_ok);
        assert_eq!(r.objects.len(), last.objects.len());
        assert_eq!(r.steps, log.steps().count());
        assert!(out.path().join(&r.stem).join("views").is_dir());
    }
    let on_disk = DatasetManifest::load(&out.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(on_disk, manifest);
    let leftovers: Vec<_> = std::fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn runs_are_deterministic_across_job_counts() {
    // Logs record the views directory, so both runs share one output dir.
    let out = tempfile::tempdir().unwrap();
    let ma = run_pipeline(&config(&fixtures().join("scenes"), &fixtures().join("transcripts"), out.path(), 1)).unwrap();
    let first = files_under(out.path());
    let mb = run_pipeline(&config(&fixtures().join("scenes"), &fixtures().join("transcripts"), out.path(), 4)).unwrap();
    assert!(ma.same_content(&mb));
    assert_eq!(first, files_under(out.path()));
}

#[test]
fn missing_placeholder_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(&fixtures().join("scenes"), &fixtures().join("transcripts"), out.path(), 1);
    cfg.goal_template = "A bedroom, where doors are blocked with large objects.".into();
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(_))));
    assert!(!out.path().join(MANIFEST_FILE).exists());

    // A fixed goal is fine once batch mode is off.
    cfg.batch = false;
    let single = tempfile::tempdir().unwrap();
    cfg.scenes_dir = single.path().to_path_buf();
    std::fs::copy(fixtures().join("scenes/bedroom.json"), cfg.scenes_dir.join("bedroom.json")).unwrap();
    let m = run_pipeline(&cfg).unwrap();
    assert_eq!(m.records[0].status, Status::Ok);
}

#[test]
fn truncated_transcript_fails_only_its_record() {
    let out = tempfile::tempdir().unwrap();
    let scripts = tempfile::tempdir().unwrap();
    for e in std::fs::read_dir(fixtures().join("transcripts")).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            std::fs::copy(&p, scripts.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let editor = scripts.path().join("kitchen.editor.jsonl");
    let first = std::fs::read_to_string(&editor).unwrap().lines().next().unwrap().to_string();
    std::fs::write(&editor, first + "\n").unwrap();

    let manifest = run_pipeline(&config(&fixtures().join("scenes"), scripts.path(), out.path(), 3)).unwrap();
    for r in &manifest.records {
        if r.stem == "kitchen" {
            assert_eq!(r.status, Status::Failed);
            assert!(r.error.as_deref().unwrap().contains("exhausted"), "{:?}", r.error);
            assert!(r.episode_log.is_some(), "partial log is kept");
        } else {
            assert_eq!(r.status, Status::Ok, "{}", r.stem);
        }
    }
}

#[test]
fn collision_off_run_is_recorded_in_the_manifest() {
    let out = tempfile::tempdir().unwrap();
    let scenes = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("scenes/bedroom.json"), scenes.path().join("bedroom.json")).unwrap();
    let mut cfg = config(scenes.path(), &fixtures().join("transcripts/collision_off"), out.path(), 1);
    cfg.loop_config.collision_checking = false;
    let m = run_pipeline(&cfg).unwrap();
    assert!(!m.collision_checking);
    assert_eq!(m.records[0].status, Status::Ok, "{:?}", m.records[0].error);
}
