//! Parse a scene file, report validation issues and print its hash.
//!
//! cargo run --example parse_and_validate -- [SCENE.json]

use scene_agents::env::scene_hash;
use scene_agents::scene::{parse_scene, serialize_scene, validate_scene};

fn main() {
    let path =
        std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenes/bedroom.json").into());
    let text = std::fs::read_to_string(&path).expect("readable scene file");
    let g = match parse_scene(&text) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    let report = validate_scene(&g);
    println!("{path}: {} objects, {} doors, hash {}", g.objects.len(), g.room.doors.len(), scene_hash(&g));
    if report.is_empty() {
        println!("valid");
    } else {
        println!("issues: {}", report.summary());
    }
    println!("canonical: {}", serialize_scene(&g) == text);
}
