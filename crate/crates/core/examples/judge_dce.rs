//! Pair two render folders and run the side-swapped judge with a scripted
//! judge that prefers the view with more objects.

use std::sync::Arc;

use scene_agents::agents::{AgentEndpoint, ChatRequest, FnClient, Part, Role};
use scene_agents::eval::{make_pairs, run_dce, PairingConfig};
use scene_agents::render::{render_topdown, RenderOptions};
use scene_agents::scene::parse_scene;

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenes");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    for e in std::fs::read_dir(&root).unwrap() {
        let p = e.unwrap().path();
        let g = parse_scene(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let mut fewer = g.clone();
        fewer.objects.pop();
        let name = p.with_extension("svg").file_name().unwrap().to_owned();
        std::fs::write(a.join(&name), render_topdown(&g, &RenderOptions::default()).unwrap()).unwrap();
        std::fs::write(b.join(&name), render_topdown(&fewer, &RenderOptions::default()).unwrap()).unwrap();
    }
    let cfg = PairingConfig {
        system_a: "full".into(),
        system_b: "trimmed".into(),
        goal_template: "A {room_type}, where doors are blocked with large objects.".into(),
        seed: 5,
    };
    let (manifest, truth) = make_pairs(&a, &b, &cfg).unwrap();
    let judge = AgentEndpoint::new(
        Role::Judge,
        Arc::new(FnClient(|req: &ChatRequest| {
            let mut counts = [0usize; 2];
            let mut side = None;
            for p in req.messages.iter().flat_map(|m| &m.parts) {
                if let Part::Text { text } = p {
                    match text.as_str() {
                        "LEFT:" => side = Some(0),
                        "RIGHT:" => side = Some(1),
                        t => {
                            if let Some(s) = side {
                                counts[s] += t.matches("class=\"object").count();
                            }
                        }
                    }
                }
            }
            Ok(format!(r#"{{"choice": "{}"}}"#, if counts[1] > counts[0] { "right" } else { "left" }))
        })),
    );
    let summary = run_dce(&manifest, &truth, &judge).unwrap();
    println!("wins {:?}, inconsistent {}/{}", summary.wins, summary.inconsistent, summary.total);
}
