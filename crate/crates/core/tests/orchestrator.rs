use std::path::{Path, PathBuf};
use std::sync::Arc;

use scene_agents::agents::{
    request_action, request_plan, run_episode, AgentEndpoint, AgentError, ChatRequest, ContextBundle, Endpoints, FnClient,
    LoopConfig, PlanIssue, Role, TransportError,
};
use scene_agents::constraints::{compile_constraints, evaluate, CompileConfig};
use scene_agents::env::{replay, scene_hash, Action, LogEntry, Reason};
use scene_agents::geometry::{door_blocked, pairwise_collisions};
use scene_agents::scene::{parse_scene, Point3, SceneGraph};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load(stem: &str) -> SceneGraph {
    parse_scene(&std::fs::read_to_string(fixtures().join(format!("scenes/{stem}.json"))).unwrap()).unwrap()
}

fn goal(stem: &str) -> String {
    format!("A {}, where doors are blocked with large objects.", stem.replace('_', " "))
}

fn scripted(dir: &str, stem: &str) -> Endpoints {
    let read = |role: &str| std::fs::read_to_string(fixtures().join(format!("{dir}/{stem}.{role}.jsonl"))).unwrap();
    Endpoints {
        evaluator: AgentEndpoint::scripted(Role::Evaluator, &read("evaluator")).unwrap(),
        editor: AgentEndpoint::scripted(Role::Editor, &read("editor")).unwrap(),
    }
}

fn reply(text: &'static str) -> AgentEndpoint {
    AgentEndpoint::new(Role::Evaluator, Arc::new(FnClient(move |_: &ChatRequest| Ok(text.to_string()))))
}

fn bundle(g: &SceneGraph) -> ContextBundle {
    let cs = compile_constraints(&goal("bedroom"), g, &CompileConfig::default()).unwrap();
    ContextBundle::build(g, &cs, None, &[], 0, &LoopConfig::default()).unwrap()
}

const STEMS: [&str; 6] = ["bedroom", "kitchen", "office", "living_room", "classroom", "study"];

#[test]
fn every_fixture_episode_blocks_its_doors() {
    let cfg = LoopConfig::default();
    for stem in STEMS {
        let g0 = load(stem);
        let ep =
            run_episode(&g0, &goal(stem), &scripted("transcripts", stem), &cfg).unwrap_or_else(|f| panic!("{stem}: {}", f.error));
        assert!(ep.report.overall_hard_ok, "{stem}");
        assert!(ep.feedback_rounds <= cfg.max_feedback_rounds);
        let again = evaluate(&ep.constraints, &ep.scene, &cfg.geometry).unwrap();
        assert_eq!(again, ep.report, "{stem}");
        for d in &ep.scene.room.doors {
            let b = door_blocked(&ep.scene, &d.id, 0.6, 0.25, 0.01).unwrap();
            assert!(b.blocked, "{stem}/{}", d.id);
            assert!(b.blocking_ids.iter().any(|id| ep.scene.object(id).unwrap().is_large()), "{stem}/{}", d.id);
        }
        assert!(pairwise_collisions(&ep.scene, cfg.eps).is_empty());
        let last = replay(&g0, &ep.log, &cfg.env()).unwrap();
        assert_eq!(&scene_hash(&last), ep.log.final_hash());
        assert_eq!(last, ep.scene);
    }
}

#[test]
fn steps_follow_their_plans() {
    let cfg = LoopConfig::default();
    for stem in STEMS {
        let ep = run_episode(&load(stem), &goal(stem), &scripted("transcripts", stem), &cfg).unwrap();
        let plans: Vec<_> = ep.log.plans().cloned().collect();
        for s in ep.log.steps() {
            let p = plans.iter().find(|p| p.round == s.round).unwrap();
            assert!(s.action.same_target(&p.actions[s.plan_index]), "{stem} step {}", s.step);
        }
        assert!(plans.iter().all(|p| p.round <= cfg.max_feedback_rounds && p.actions.len() <= cfg.max_plan_length));
    }
}

#[test]
fn bedroom_needs_a_second_round() {
    let ep =
        run_episode(&load("bedroom"), &goal("bedroom"), &scripted("transcripts", "bedroom"), &LoopConfig::default()).unwrap();
    assert_eq!(ep.feedback_rounds, 1);
    let reports: Vec<_> = ep
        .log
        .lines
        .iter()
        .filter_map(|l| match &l.entry {
            LogEntry::Report { report, .. } => Some(report.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(reports.len(), 2);
    let first = reports[0].get("goal/door_blocked/door_0").unwrap();
    assert!(!first.satisfied);
    assert!(first.detail.contains("impassable"), "{}", first.detail);
}

#[test]
fn kitchen_editor_corrects_a_collision() {
    let ep =
        run_episode(&load("kitchen"), &goal("kitchen"), &scripted("transcripts", "kitchen"), &LoopConfig::default()).unwrap();
    let steps: Vec<_> = ep.log.steps().collect();
    assert_eq!(steps.len(), 3);
    assert_eq!(steps[1].outcome.reason, Reason::Collision);
    assert_eq!(steps[1].outcome.colliding_ids, ["stool_1"]);
    assert!(steps[2].outcome.accepted);
    assert_eq!(steps[1].plan_index, steps[2].plan_index);
    let plan = ep.log.plans().next().unwrap();
    assert_eq!(plan.predicted[1].reason, Reason::Collision);
}

#[test]
fn collision_off_allows_interpenetration() {
    let cfg = LoopConfig { collision_checking: false, ..LoopConfig::default() };
    let g0 = load("bedroom");
    let ep = run_episode(&g0, &goal("bedroom"), &scripted("transcripts/collision_off", "bedroom"), &cfg).unwrap();
    assert!(ep.report.overall_hard_ok);
    assert_eq!(pairwise_collisions(&ep.scene, cfg.eps), [("chair_0".to_string(), "wardrobe_0".to_string())]);
    assert!(ep.log.steps().all(|s| s.outcome.accepted));
    assert!(!ep.report.get("collision/no_overlap").unwrap().satisfied);

    // The same log does not replay with collision checking on.
    assert!(replay(&g0, &ep.log, &LoopConfig::default().env()).is_err());
}

#[test]
fn empty_replans_exhaust_the_rounds() {
    let cfg = LoopConfig::default();
    let endpoints = Endpoints { evaluator: reply(r#"{"actions": [], "rationale": "nothing"}"#), editor: reply("") };
    let f = run_episode(&load("bedroom"), &goal("bedroom"), &endpoints, &cfg).unwrap_err();
    assert!(matches!(f.error, AgentError::EpisodeFailed { rounds: 3 }));
    let log = f.log.unwrap();
    assert_eq!(log.plans().count(), 4);
    assert_eq!(log.steps().count(), 0);
    assert!(!f.report.unwrap().overall_hard_ok);
}

#[test]
fn mocked_episodes_are_deterministic() {
    let cfg = LoopConfig::default();
    for stem in ["office", "kitchen"] {
        let a = run_episode(&load(stem), &goal(stem), &scripted("transcripts", stem), &cfg).unwrap();
        let b = run_episode(&load(stem), &goal(stem), &scripted("transcripts", stem), &cfg).unwrap();
        assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());
        assert_eq!(scene_hash(&a.scene), scene_hash(&b.scene));
    }
}

#[test]
fn plan_requests() {
    let g = load("bedroom");
    let b = bundle(&g);
    let cfg = LoopConfig::default();
    let three = reply(
        r#"{"actions": [
            {"object_id": "chair_0", "operation": "rotate", "parameters": {"yaw": 45}},
            {"object_id": "lamp_0", "operation": "delete"},
            {"object_id": "chair_0", "operation": "move", "parameters": {"position": [2.0, 0.45, 0.6]}}
        ], "rationale": "tidy"}"#,
    );
    assert_eq!(request_plan(&three, &b, &cfg).unwrap().actions.len(), 3);

    let ghost = reply(r#"{"actions": [{"object_id": "sofa_99", "operation": "delete"}]}"#);
    assert!(matches!(
        request_plan(&ghost, &b, &cfg),
        Err(AgentError::PlanValidationFailure(PlanIssue::UnknownObject(id))) if id == "sofa_99"
    ));

    let calls = Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let c = calls.clone();
    let prose = AgentEndpoint::new(
        Role::Evaluator,
        Arc::new(FnClient(move |req: &ChatRequest| {
            c.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if req.messages.len() > 2 {
                assert!(req.messages.last().unwrap().joined_text().contains("could not be parsed"));
            }
            Ok("I think the wardrobe should go by the door.".to_string())
        })),
    );
    assert!(matches!(request_plan(&prose, &b, &cfg), Err(AgentError::PlanParseFailure(_))));
    assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 2);

    let long = format!(
        r#"{{"actions": [{}]}}"#,
        vec![r#"{"object_id": "lamp_0", "operation": "rotate", "parameters": {"yaw": 1}}"#; 31].join(",")
    );
    let long: &'static str = Box::leak(long.into_boxed_str());
    assert!(matches!(
        request_plan(&reply(long), &b, &cfg),
        Err(AgentError::PlanValidationFailure(PlanIssue::TooLong { len: 31, max: 30 }))
    ));
}

#[test]
fn action_requests() {
    let g = load("bedroom");
    let b = bundle(&g);
    let cfg = LoopConfig::default();
    let hint = Action::move_to("wardrobe_0", Point3::new(1.0, 1.0, 1.0));
    let echo = AgentEndpoint::new(Role::Editor, Arc::new(FnClient(|r: &ChatRequest| Ok(r.hint.clone().unwrap()))));
    assert_eq!(request_action(&echo, &b, &hint, &cfg).unwrap(), hint);

    let nudge = reply(r#"{"object_id": "wardrobe_0", "operation": "move", "parameters": {"position": [1.1, 1.0, 1.0]}}"#);
    assert_eq!(request_action(&nudge, &b, &hint, &cfg).unwrap(), Action::move_to("wardrobe_0", Point3::new(1.1, 1.0, 1.0)));

    let deviate = reply(r#"{"object_id": "wardrobe_0", "operation": "delete"}"#);
    assert!(matches!(request_action(&deviate, &b, &hint, &cfg), Err(AgentError::ActionParseFailure(_))));

    let calls = Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let c = calls.clone();
    let garbage = AgentEndpoint::new(
        Role::Editor,
        Arc::new(FnClient(move |_: &ChatRequest| {
            c.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok("ok!".to_string())
        })),
    );
    assert!(matches!(request_action(&garbage, &b, &hint, &cfg), Err(AgentError::ActionParseFailure(_))));
    assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 1 + cfg.editor_retry_limit);

    let down = AgentEndpoint::new(
        Role::Editor,
        Arc::new(FnClient(|_: &ChatRequest| Err(TransportError::Http("connection refused".into())))),
    );
    assert!(matches!(request_action(&down, &b, &hint, &cfg), Err(AgentError::Transport(_))));
}

#[test]
fn views_are_written_and_mode_logged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoopConfig { views_dir: Some(dir.path().to_path_buf()), ..LoopConfig::default() };
    let mut endpoints = scripted("transcripts", "study");
    endpoints.evaluator.vision = true;
    let saw_image = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let inner = endpoints.evaluator.client.clone();
    let flag = saw_image.clone();
    endpoints.evaluator.client = Arc::new(FnClient(move |r: &ChatRequest| {
        if r.messages.iter().any(|m| m.parts.iter().any(|p| matches!(p, scene_agents::agents::Part::Image { .. }))) {
            flag.store(true, std::sync::atomic::Ordering::SeqCst);
        }
        inner.complete(r)
    }));
    let ep = run_episode(&load("study"), &goal("study"), &endpoints, &cfg).unwrap();
    assert!(saw_image.load(std::sync::atomic::Ordering::SeqCst));
    assert_eq!(ep.log.plans().next().unwrap().views, "image");
    for f in ["view_t0.svg", "occ_t0.pgm"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn truncated_transcript_is_a_transport_error() {
    let endpoints = Endpoints {
        evaluator: AgentEndpoint::scripted(Role::Evaluator, "").unwrap(),
        editor: AgentEndpoint::scripted(Role::Editor, "").unwrap(),
    };
    let f = run_episode(&load("study"), &goal("study"), &endpoints, &LoopConfig::default()).unwrap_err();
    assert!(matches!(f.error, AgentError::Transport(TransportError::ScriptExhausted(0))));
}
