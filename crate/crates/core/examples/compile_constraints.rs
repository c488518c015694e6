//! Compile a goal into constraints and evaluate them against a scene.
//!
//! cargo run --example compile_constraints -- ["GOAL"]

use scene_agents::constraints::{compile_constraints, evaluate, serialize_constraints, CompileConfig};
use scene_agents::geometry::GeometryParams;
use scene_agents::scene::parse_scene;

fn main() {
    let goal = std::env::args().nth(1).unwrap_or_else(|| "A bedroom, where doors are blocked with large objects.".into());
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenes/bedroom.json")).unwrap();
    let g = parse_scene(&text).unwrap();
    let cs = match compile_constraints(&goal, &g, &CompileConfig::default()) {
        Ok(cs) => cs,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    print!("{}", serialize_constraints(&cs));
    let report = evaluate(&cs, &g, &GeometryParams::default()).unwrap();
    for r in &report.results {
        println!("{:<28} {:?} satisfied={} margin={:.3}", r.id, r.severity, r.satisfied, r.margin);
    }
    println!("hard constraints met: {}", report.overall_hard_ok);
}
