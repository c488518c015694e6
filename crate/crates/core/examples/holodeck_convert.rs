//! Convert a Holodeck-style layout into the native scene format and validate it.
//!
//! cargo run --example holodeck_convert -- [INPUT.json]

use scene_agents::scene::{convert_holodeck, serialize_scene, validate_scene};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/holodeck/dining_room.json").into());
    let g = match convert_holodeck(&std::fs::read_to_string(&path).unwrap()) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    print!("{}", serialize_scene(&g));
    let report = validate_scene(&g);
    eprintln!("{} objects; {}", g.objects.len(), if report.is_empty() { "valid".into() } else { report.summary() });
}
