//! Scene graph data model and the on-disk scene format (schema v1).
//!
//! A scene is a single room (floor polygon in the x/z plane, y up) plus an
//! ordered list of upright objects. Objects are placed by the centre of their
//! local box and rotated about the vertical axis only.

mod holodeck;
pub(crate) mod validate;

pub use holodeck::{convert_holodeck, HolodeckError};
pub use validate::{validate_scene, validate_scene_with, Issue, IssueCode, ValidationReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";

/// Footprint area (m²) at or above which an object counts as large.
pub const DEFAULT_LARGE_OBJECT_THRESHOLD: f64 = 0.5;

/// Point on the floor plane: `x` east, `z` the second horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.z * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;

    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.z + o.z)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.z - o.z)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, z]: [f64; 2]) -> Self {
        Self { x, z }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.z]
    }
}

/// World-space point, y up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(self) -> Point2 {
        Point2::new(self.x, self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Local box extents: `width` along local x, `height` along y, `depth` along local z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub width: f64,
    pub height: f64,
    pub depth: f64,
}

impl Dims {
    pub const fn new(width: f64, height: f64, depth: f64) -> Self {
        Self { width, height, depth }
    }

    pub fn footprint_area(&self) -> f64 {
        self.width * self.depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassClass {
    Small,
    Large,
}

impl MassClass {
    pub fn from_footprint(dims: &Dims, large_object_threshold: f64) -> Self {
        if dims.footprint_area() >= large_object_threshold {
            MassClass::Large
        } else {
            MassClass::Small
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Door {
    pub id: String,
    pub wall_index: usize,
    pub center: Point2,
    pub width: f64,
}

/// Wall-anchored opening; carried as metadata and never constrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub id: String,
    pub wall_index: usize,
    pub center: Point2,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub floor_polygon: Vec<Point2>,
    pub height: f64,
    pub doors: Vec<Door>,
    #[serde(default)]
    pub windows: Vec<Window>,
}

impl Room {
    /// Endpoints of wall `i`, running from vertex `i` to vertex `i + 1`.
    pub fn wall(&self, i: usize) -> Option<(Point2, Point2)> {
        let n = self.floor_polygon.len();
        if i >= n || n < 2 {
            return None;
        }
        Some((self.floor_polygon[i], self.floor_polygon[(i + 1) % n]))
    }

    pub fn door(&self, id: &str) -> Option<&Door> {
        self.doors.iter().find(|d| d.id == id)
    }

    /// Shoelace signed area; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.floor_polygon)
    }

    /// Area centroid of the floor polygon.
    pub fn centroid(&self) -> Point2 {
        let pts = &self.floor_polygon;
        let a = signed_area(pts);
        if a.abs() < 1e-12 {
            let n = pts.len().max(1) as f64;
            let sx: f64 = pts.iter().map(|p| p.x).sum();
            let sz: f64 = pts.iter().map(|p| p.z).sum();
            return Point2::new(sx / n, sz / n);
        }
        let (mut cx, mut cz) = (0.0, 0.0);
        for i in 0..pts.len() {
            let p = pts[i];
            let q = pts[(i + 1) % pts.len()];
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cz += (p.z + q.z) * c;
        }
        Point2::new(cx / (6.0 * a), cz / (6.0 * a))
    }

    /// Axis-aligned bounds of the floor polygon as `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.floor_polygon {
            min.x = min.x.min(p.x);
            min.z = min.z.min(p.z);
            max.x = max.x.max(p.x);
            max.z = max.z.max(p.z);
        }
        (min, max)
    }

    /// Even-odd point-in-polygon test. Points on the boundary may go either way.
    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(&self.floor_polygon, p)
    }
}

pub(crate) fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>() / 2.0
}

pub(crate) fn point_in_polygon(pts: &[Point2], p: Point2) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.z > p.z) != (b.z > p.z) {
            let x = a.x + (p.z - a.z) / (b.z - a.z) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub id: String,
    pub class_label: String,
    pub position: Point3,
    /// Degrees about +y, normalized to `[0, 360)`.
    pub yaw: f64,
    pub dims: Dims,
    pub movable: bool,
    pub mass_class: MassClass,
}

impl SceneObject {
    /// Builds an object with `yaw` normalized and `mass_class` derived from the
    /// default large-object threshold.
    pub fn new(
        id: impl Into<String>,
        class_label: impl Into<String>,
        position: Point3,
        yaw: f64,
        dims: Dims,
        movable: bool,
    ) -> Self {
        Self {
            id: id.into(),
            class_label: class_label.into(),
            position,
            yaw: normalize_yaw(yaw),
            mass_class: MassClass::from_footprint(&dims, DEFAULT_LARGE_OBJECT_THRESHOLD),
            dims,
            movable,
        }
    }

    pub fn is_large(&self) -> bool {
        self.mass_class == MassClass::Large
    }
}

/// Maps any finite angle into `[0, 360)`.
pub fn normalize_yaw(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 || r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGraph {
    pub schema_version: String,
    pub room: Room,
    pub objects: Vec<SceneObject>,
    pub exits: Vec<String>,
}

impl SceneGraph {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("invariant violation: {}", .0.summary())]
    InvariantViolation(ValidationReport),
}

/// Parse options; the threshold decides `mass_class` for every object.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub large_object_threshold: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { large_object_threshold: DEFAULT_LARGE_OBJECT_THRESHOLD }
    }
}

// Input-side object: mass_class is optional and checked against the footprint.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    id: String,
    class_label: String,
    position: Point3,
    yaw: f64,
    dims: Dims,
    movable: bool,
    #[serde(default)]
    mass_class: Option<MassClass>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    schema_version: String,
    room: Room,
    objects: Vec<RawObject>,
    exits: Vec<String>,
}

pub fn parse_scene(text: &str) -> Result<SceneGraph, SceneError> {
    parse_scene_with(text, ParseOptions::default())
}

pub fn parse_scene_with(text: &str, opts: ParseOptions) -> Result<SceneGraph, SceneError> {
    // Syntax is checked first so that bad JSON never reports as a schema error.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SceneError::MalformedInput(e.to_string()))?;
    let raw: RawScene = serde_path_to_error::deserialize(value)
        .map_err(|e| SceneError::SchemaViolation { path: e.path().to_string(), message: e.inner().to_string() })?;

    let mut report = ValidationReport::default();
    let objects = raw
        .objects
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            let derived = MassClass::from_footprint(&o.dims, opts.large_object_threshold);
            if let Some(given) = o.mass_class {
                if given != derived {
                    report.push(IssueCode::MassClassMismatch, format!("objects[{i}].mass_class"), Some(o.id.clone()));
                }
            }
            SceneObject {
                yaw: if o.yaw.is_finite() { normalize_yaw(o.yaw) } else { o.yaw },
                id: o.id,
                class_label: o.class_label,
                position: o.position,
                dims: o.dims,
                movable: o.movable,
                mass_class: derived,
            }
        })
        .collect();
    let g = SceneGraph { schema_version: raw.schema_version, room: raw.room, objects, exits: raw.exits };
    report.issues.extend(validate_scene_with(&g, opts).issues);
    if report.is_empty() {
        Ok(g)
    } else {
        Err(SceneError::InvariantViolation(report))
    }
}

/// Canonical text form: struct-order keys, two-space indentation, shortest
/// round-trip floats, trailing newline.
pub fn serialize_scene(g: &SceneGraph) -> String {
    let mut s = serde_json::to_string_pretty(g).expect("scene graph serializes");
    s.push('\n');
    s
}

#[cfg(test)]
pub(crate) mod test_scenes {
    use super::*;

    pub fn rect_room(w: f64, d: f64) -> Room {
        Room {
            floor_polygon: vec![Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w, d), Point2::new(0.0, d)],
            height: 2.7,
            doors: vec![Door { id: "door_0".into(), wall_index: 0, center: Point2::new(1.0, 0.0), width: 1.0 }],
            windows: vec![],
        }
    }

    pub fn empty_scene(w: f64, d: f64) -> SceneGraph {
        SceneGraph { schema_version: SCHEMA_VERSION.into(), room: rect_room(w, d), objects: vec![], exits: vec!["door_0".into()] }
    }

    pub fn boxed(id: &str, x: f64, z: f64, w: f64, d: f64) -> SceneObject {
        SceneObject::new(id, "box", Point3::new(x, 0.5, z), 0.0, Dims::new(w, 1.0, d), true)
    }
}

#[cfg(test)]
mod tests {
    use super::test_scenes::*;
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": "1",
        "room": {
            "floor_polygon": [[0,0],[4,0],[4,3],[0,3]],
            "height": 2.5,
            "doors": [{"id": "d0", "wall_index": 0, "center": [2, 0], "width": 0.9}]
        },
        "objects": [],
        "exits": ["d0"]
    }"#;

    #[test]
    fn minimal_scene_parses() {
        let g = parse_scene(MINIMAL).unwrap();
        assert_eq!(g.objects.len(), 0);
        assert_eq!(g.room.doors.len(), 1);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut g = empty_scene(4.0, 3.0);
        g.objects.push(boxed("chair_0", 1.0, 1.0, 0.5, 0.5));
        g.objects.push(boxed("chair_0", 3.0, 2.0, 0.5, 0.5));
        match parse_scene(&serialize_scene(&g)) {
            Err(SceneError::InvariantViolation(r)) => {
                assert!(r.issues.iter().any(|i| i.code == IssueCode::DuplicateId && i.subject.as_deref() == Some("chair_0")));
                assert!(r.summary().contains("chair_0"));
            }
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn syntax_and_schema_errors_are_distinguished() {
        assert!(matches!(parse_scene("{not json"), Err(SceneError::MalformedInput(_))));
        let missing = MINIMAL.replace(r#""height": 2.5,"#, "");
        match parse_scene(&missing) {
            Err(SceneError::SchemaViolation { path, message }) => {
                assert_eq!(path, "room");
                assert!(message.contains("height"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let ill_typed = MINIMAL.replace(r#""width": 0.9"#, r#""width": "wide""#);
        match parse_scene(&ill_typed) {
            Err(SceneError::SchemaViolation { path, .. }) => assert_eq!(path, "room.doors[0].width"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn yaw_360_serializes_as_zero() {
        let text = MINIMAL.replace(
            r#""objects": []"#,
            r#""objects": [{"id":"a","class_label":"box","position":[1,0.5,1],"yaw":360.0,
                "dims":{"width":0.5,"height":1,"depth":0.5},"movable":true}]"#,
        );
        let g = parse_scene(&text).unwrap();
        assert_eq!(g.objects[0].yaw, 0.0);
        assert!(serialize_scene(&g).contains("\"yaw\": 0.0"));
    }

    #[test]
    fn normalize_yaw_edges() {
        assert_eq!(normalize_yaw(360.0), 0.0);
        assert_eq!(normalize_yaw(-90.0), 270.0);
        assert_eq!(normalize_yaw(725.0), 5.0);
        assert_eq!(normalize_yaw(-1e-20), 0.0);
        assert_eq!(normalize_yaw(-0.0), 0.0);
    }

    #[test]
    fn mass_class_follows_threshold() {
        let text = MINIMAL.replace(
            r#""objects": []"#,
            r#""objects": [{"id":"w","class_label":"wardrobe","position":[2,1,1],"yaw":0,
                "dims":{"width":1.2,"height":2,"depth":0.6},"movable":true,"mass_class":"small"}]"#,
        );
        match parse_scene(&text) {
            Err(SceneError::InvariantViolation(r)) => {
                assert_eq!(r.issues[0].code, IssueCode::MassClassMismatch)
            }
            other => panic!("{other:?}"),
        }
        let g = parse_scene_with(&text, ParseOptions { large_object_threshold: 1.0 }).unwrap();
        assert_eq!(g.objects[0].mass_class, MassClass::Small);
    }

    #[test]
    fn serialization_is_deterministic() {
        let g = empty_scene(4.0, 3.0);
        assert_eq!(serialize_scene(&g), serialize_scene(&g));
        let keys: Vec<_> = serialize_scene(&g)
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap().to_string())
            .collect();
        assert_eq!(keys, ["schema_version", "room", "objects", "exits"]);
    }

    #[test]
    fn centroid_of_rectangle() {
        let r = rect_room(4.0, 2.0);
        let c = r.centroid();
        assert!((c.x - 2.0).abs() < 1e-12 && (c.z - 1.0).abs() < 1e-12);
        assert!(r.signed_area() > 0.0);
    }
}
