//! Converter from Holodeck-style single-room exports to schema v1.
//!
//! Holodeck writes object sizes through its asset database rather than the
//! scene file, so this converter expects each object to carry a `size`
//! (`{x, y, z}`, metres) added at export time.

use serde::Deserialize;
use thiserror::Error;

use super::validate::dist_to_segment;
use super::{
    normalize_yaw, serialize_scene, signed_area, Dims, Door, MassClass, Point2, Point3, Room, SceneGraph, SceneObject, Window,
    DEFAULT_LARGE_OBJECT_THRESHOLD, SCHEMA_VERSION,
};

const SEGMENT_MATCH_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum HolodeckError {
    #[error("malformed export: {0}")]
    Malformed(String),
    #[error("export contains no rooms")]
    NoRoom,
    #[error("opening `{0}` does not lie on any wall of the floor polygon")]
    OpeningOffWall(String),
}

#[derive(Deserialize)]
struct Xyz {
    x: f64,
    #[serde(default)]
    y: f64,
    z: f64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HRoom {
    floor_polygon: Vec<Xyz>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HDoor {
    id: String,
    door_segment: [[f64; 2]; 2],
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HWindow {
    id: String,
    window_segment: [[f64; 2]; 2],
}

#[derive(Deserialize)]
struct HObject {
    id: String,
    #[serde(default)]
    object_name: Option<String>,
    position: Xyz,
    rotation: Xyz,
    size: Xyz,
    #[serde(default)]
    movable: Option<bool>,
}

#[derive(Deserialize)]
struct HScene {
    rooms: Vec<HRoom>,
    #[serde(default)]
    doors: Vec<HDoor>,
    #[serde(default)]
    windows: Vec<HWindow>,
    objects: Vec<HObject>,
    #[serde(default = "default_wall_height")]
    wall_height: f64,
}

fn default_wall_height() -> f64 {
    2.7
}

/// `bed-0 (bedroom)` / `bed-0` → `bed`.
fn class_from_name(name: &str) -> String {
    let base = name.split(" (").next().unwrap_or(name);
    match base.rsplit_once('-') {
        Some((head, tail)) if !head.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) => head.to_string(),
        _ => base.to_string(),
    }
}

fn place_on_wall(poly: &[Point2], id: &str, seg: [[f64; 2]; 2]) -> Result<(usize, Point2, f64), HolodeckError> {
    let (p, q) = (Point2::from(seg[0]), Point2::from(seg[1]));
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if dist_to_segment(p, a, b) <= SEGMENT_MATCH_TOLERANCE && dist_to_segment(q, a, b) <= SEGMENT_MATCH_TOLERANCE {
            // Snap the midpoint exactly onto the wall.
            let mid = (p + q).scale(0.5);
            let ab = b - a;
            let t = ((mid - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            return Ok((i, a + ab.scale(t), p.dist(q)));
        }
    }
    Err(HolodeckError::OpeningOffWall(id.to_string()))
}

/// Converts the first room of a Holodeck-style export. Every door becomes an exit.
pub fn convert_holodeck(text: &str) -> Result<SceneGraph, HolodeckError> {
    let h: HScene = serde_json::from_str(text).map_err(|e| HolodeckError::Malformed(e.to_string()))?;
    let room = h.rooms.first().ok_or(HolodeckError::NoRoom)?;
    let mut poly: Vec<Point2> = room.floor_polygon.iter().map(|p| Point2::new(p.x, p.z)).collect();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }

    let mut doors = Vec::new();
    for d in &h.doors {
        let (wall_index, center, width) = place_on_wall(&poly, &d.id, d.door_segment)?;
        doors.push(Door { id: d.id.clone(), wall_index, center, width });
    }
    let mut windows = Vec::new();
    for w in &h.windows {
        let (wall_index, center, width) = place_on_wall(&poly, &w.id, w.window_segment)?;
        windows.push(Window { id: w.id.clone(), wall_index, center, width });
    }

    let objects = h
        .objects
        .iter()
        .map(|o| {
            let dims = Dims::new(o.size.x, o.size.y, o.size.z);
            SceneObject {
                id: o.id.clone(),
                class_label: class_from_name(o.object_name.as_deref().unwrap_or(&o.id)),
                position: Point3::new(o.position.x, o.position.y, o.position.z),
                yaw: normalize_yaw(o.rotation.y),
                mass_class: MassClass::from_footprint(&dims, DEFAULT_LARGE_OBJECT_THRESHOLD),
                dims,
                movable: o.movable.unwrap_or(true),
            }
        })
        .collect();

    let exits = doors.iter().map(|d| d.id.clone()).collect();
    let g = SceneGraph {
        schema_version: SCHEMA_VERSION.into(),
        room: Room { floor_polygon: poly, height: h.wall_height, doors, windows },
        objects,
        exits,
    };
    // Route through the strict parser so converted scenes obey every invariant.
    super::parse_scene(&serialize_scene(&g)).map_err(|e| HolodeckError::Malformed(e.to_string()))
}
