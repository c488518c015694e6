//! Write a top-down SVG, an occupancy PGM and the text map of a scene.
//!
//! cargo run --example render_views -- OUT_DIR

use scene_agents::geometry::occupancy_grid;
use scene_agents::render::{render_occupancy, render_text_map, render_topdown, RenderOptions};
use scene_agents::scene::parse_scene;

fn main() {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "views".into()));
    std::fs::create_dir_all(&out).unwrap();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenes/living_room.json")).unwrap();
    let g = parse_scene(&text).unwrap();
    let opts = RenderOptions { highlight_ids: vec![g.objects[0].id.clone()], ..RenderOptions::default() };
    std::fs::write(out.join("topdown.svg"), render_topdown(&g, &opts).unwrap()).unwrap();
    std::fs::write(out.join("occupancy.pgm"), render_occupancy(&occupancy_grid(&g, 0.05).unwrap())).unwrap();
    print!("{}", render_text_map(&g, 0.1, 0.6));
    println!("wrote {}", out.display());
}
