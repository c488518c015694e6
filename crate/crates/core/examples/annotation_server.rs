//! Serve a blinded pair set, answer every pair over HTTP, then aggregate.
//! Pass `--hold` to keep the server up for a browser.

use scene_agents::eval::{aggregate_preferences, make_pairs, spawn_annotation_server, PairingConfig, ServerConfig};
use scene_agents::render::{render_topdown, RenderOptions};
use scene_agents::scene::parse_scene;
use serde_json::{json, Value};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenes");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    for e in std::fs::read_dir(&root).unwrap() {
        let p = e.unwrap().path();
        let g = parse_scene(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let name = p.with_extension("svg").file_name().unwrap().to_owned();
        let opts = |seed| RenderOptions { palette_seed: seed, ..RenderOptions::default() };
        std::fs::write(a.join(&name), render_topdown(&g, &opts(1)).unwrap()).unwrap();
        std::fs::write(b.join(&name), render_topdown(&g, &opts(2)).unwrap()).unwrap();
    }
    let cfg = PairingConfig {
        system_a: "warm".into(),
        system_b: "cool".into(),
        goal_template: "A {room_type}, where doors are blocked with large objects.".into(),
        seed: 9,
    };
    let (manifest, truth) = make_pairs(&a, &b, &cfg).unwrap();
    let server = spawn_annotation_server(
        ServerConfig { manifest, store_path: tmp.path().join("responses.jsonl"), ui_dir: None },
        "127.0.0.1:0",
    )
    .unwrap();
    println!("serving on {}", server.url());
    if std::env::args().any(|a| a == "--hold") {
        server.wait();
        return;
    }
    let http = reqwest::blocking::Client::new();
    loop {
        let next: Value = http.get(format!("{}/api/pairs/next?annotator=demo", server.url())).send().unwrap().json().unwrap();
        if next["done"] == true {
            break;
        }
        println!("{} {}", next["pair_id"], next["goal"]);
        let body = json!({"pair_id": next["pair_id"], "annotator_id": "demo", "choice": "left"});
        let status = http.post(format!("{}/api/responses", server.url())).json(&body).send().unwrap().status();
        assert_eq!(status, 201);
    }
    let prefs = aggregate_preferences(&server.responses(), &truth).unwrap();
    println!("always-left annotator picked: {:?}", prefs.selections);
}
