//! List interpenetrating pairs, then show a move rejected with checking on
//! and accepted with it off.

use scene_agents::env::{apply_action, Action, EnvConfig};
use scene_agents::geometry::{pairwise_collisions, world_aabb};
use scene_agents::scene::{parse_scene, Point3};

fn main() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenes/bedroom.json")).unwrap();
    let g = parse_scene(&text).unwrap();
    for o in &g.objects {
        let b = world_aabb(o);
        println!("{:<12} x {:.2}..{:.2}  z {:.2}..{:.2}", o.id, b.min.x, b.max.x, b.min.z, b.max.z);
    }
    println!("collisions now: {:?}", pairwise_collisions(&g, 1e-6));

    let push = Action::move_to("chair_0", Point3::new(0.35, 0.45, 2.5));
    let (_, on) = apply_action(&g, &push, &EnvConfig::default());
    println!("checking on:  {on}");
    let off = EnvConfig { collision_checking: false, ..EnvConfig::default() };
    let (moved, out) = apply_action(&g, &push, &off);
    println!("checking off: {out}");
    println!("collisions after: {:?}", pairwise_collisions(&moved, 1e-6));
}
