//! Slide a crate across a doorway and watch coverage and passability change.

use scene_agents::geometry::{door_blocked, GeometryParams};
use scene_agents::scene::{Dims, Door, Point2, Point3, Room, SceneGraph, SceneObject, SCHEMA_VERSION};

fn main() {
    let room = Room {
        floor_polygon: [(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0)].iter().map(|&(x, z)| Point2::new(x, z)).collect(),
        height: 2.7,
        doors: vec![Door { id: "door_0".into(), wall_index: 0, center: Point2::new(2.0, 0.0), width: 0.9 }],
        windows: vec![],
    };
    let p = GeometryParams::default();
    println!("offset  coverage  passable  blockers");
    for step in 0..=8 {
        let x = 0.8 + step as f64 * 0.15;
        let crate_ = SceneObject::new("crate", "crate", Point3::new(x, 0.4, 0.35), 0.0, Dims::new(0.6, 0.8, 0.6), true);
        let g = SceneGraph {
            schema_version: SCHEMA_VERSION.into(),
            room: room.clone(),
            objects: vec![crate_],
            exits: vec!["door_0".into()],
        };
        let r = door_blocked(&g, "door_0", p.door_depth, p.clearance_radius, p.raster).unwrap();
        println!("{x:>6.2}  {:>8.3}  {:>8}  {:?}", r.coverage, r.passable, r.blocking_ids);
    }
}
