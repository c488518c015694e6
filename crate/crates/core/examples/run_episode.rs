//! Run the plan-and-execute loop on a fixture with scripted agents.
//!
//! cargo run --example run_episode -- [STEM]

use scene_agents::agents::{run_episode, AgentEndpoint, Endpoints, LoopConfig, Role};
use scene_agents::scene::parse_scene;

fn main() {
    let stem = std::env::args().nth(1).unwrap_or_else(|| "kitchen".into());
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let g0 = parse_scene(&std::fs::read_to_string(root.join(format!("scenes/{stem}.json"))).unwrap()).unwrap();
    let script = |role: &str| std::fs::read_to_string(root.join(format!("transcripts/{stem}.{role}.jsonl"))).unwrap();
    let endpoints = Endpoints {
        evaluator: AgentEndpoint::scripted(Role::Evaluator, &script("evaluator")).unwrap(),
        editor: AgentEndpoint::scripted(Role::Editor, &script("editor")).unwrap(),
    };
    let goal = format!("A {}, where doors are blocked with large objects.", stem.replace('_', " "));
    match run_episode(&g0, &goal, &endpoints, &LoopConfig::default()) {
        Ok(ep) => {
            for s in ep.log.steps() {
                println!("step {:>2} round {} {:<14} {}", s.step, s.round, s.action.object_id, s.outcome);
            }
            println!("feedback rounds: {}, hard constraints met: {}", ep.feedback_rounds, ep.report.overall_hard_ok);
        }
        Err(f) => {
            eprintln!("episode failed: {}", f.error);
            std::process::exit(1);
        }
    }
}
