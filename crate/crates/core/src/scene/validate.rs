use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{MassClass, ParseOptions, Point2, SceneGraph, SCHEMA_VERSION};

/// Distance tolerance (m) for door placement on walls.
pub const WALL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    UnsupportedSchemaVersion,
    EmptyId,
    DuplicateId,
    DuplicateDoorId,
    DanglingExit,
    PolygonTooFewVertices,
    PolygonSelfIntersecting,
    PolygonNotCounterClockwise,
    NonpositiveRoomHeight,
    WallIndexOutOfRange,
    DoorOffWall,
    DoorExceedsWall,
    NonpositiveDoorWidth,
    NonpositiveDims,
    YawOutOfRange,
    MassClassMismatch,
    NonFinite,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::UnsupportedSchemaVersion => "UNSUPPORTED_SCHEMA_VERSION",
            IssueCode::EmptyId => "EMPTY_ID",
            IssueCode::DuplicateId => "DUPLICATE_ID",
            IssueCode::DuplicateDoorId => "DUPLICATE_DOOR_ID",
            IssueCode::DanglingExit => "DANGLING_EXIT",
            IssueCode::PolygonTooFewVertices => "POLYGON_TOO_FEW_VERTICES",
            IssueCode::PolygonSelfIntersecting => "POLYGON_SELF_INTERSECTING",
            IssueCode::PolygonNotCounterClockwise => "POLYGON_NOT_COUNTER_CLOCKWISE",
            IssueCode::NonpositiveRoomHeight => "NONPOSITIVE_ROOM_HEIGHT",
            IssueCode::WallIndexOutOfRange => "WALL_INDEX_OUT_OF_RANGE",
            IssueCode::DoorOffWall => "DOOR_OFF_WALL",
            IssueCode::DoorExceedsWall => "DOOR_EXCEEDS_WALL",
            IssueCode::NonpositiveDoorWidth => "NONPOSITIVE_DOOR_WIDTH",
            IssueCode::NonpositiveDims => "NONPOSITIVE_DIMS",
            IssueCode::YawOutOfRange => "YAW_OUT_OF_RANGE",
            IssueCode::MassClassMismatch => "MASS_CLASS_MISMATCH",
            IssueCode::NonFinite => "NON_FINITE",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    /// JSON-style path of the offending field, e.g. `room.doors[1].center`.
    pub path: String,
    /// Id of the object, door, or exit involved, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub(crate) fn push(&mut self, code: IssueCode, path: String, subject: Option<String>) {
        self.issues.push(Issue { code, path, subject });
    }

    pub fn summary(&self) -> String {
        self.issues
            .iter()
            .map(|i| match &i.subject {
                Some(s) => format!("{} at {} ({s})", i.code, i.path),
                None => format!("{} at {}", i.code, i.path),
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn validate_scene(g: &SceneGraph) -> ValidationReport {
    validate_scene_with(g, ParseOptions::default())
}

pub fn validate_scene_with(g: &SceneGraph, opts: ParseOptions) -> ValidationReport {
    let mut r = ValidationReport::default();
    if g.schema_version != SCHEMA_VERSION {
        r.push(IssueCode::UnsupportedSchemaVersion, "schema_version".into(), None);
    }
    validate_room(g, &mut r);

    let mut seen = HashSet::new();
    for (i, o) in g.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        if o.id.is_empty() {
            r.push(IssueCode::EmptyId, format!("{path}.id"), None);
        } else if !seen.insert(o.id.as_str()) {
            r.push(IssueCode::DuplicateId, format!("{path}.id"), Some(o.id.clone()));
        }
        let subject = Some(o.id.clone());
        let d = &o.dims;
        let nums = [o.position.x, o.position.y, o.position.z, o.yaw, d.width, d.height, d.depth];
        if nums.iter().any(|v| !v.is_finite()) {
            r.push(IssueCode::NonFinite, path.clone(), subject.clone());
            continue;
        }
        if d.width <= 0.0 || d.height <= 0.0 || d.depth <= 0.0 {
            r.push(IssueCode::NonpositiveDims, format!("{path}.dims"), subject.clone());
        }
        if !(0.0..360.0).contains(&o.yaw) {
            r.push(IssueCode::YawOutOfRange, format!("{path}.yaw"), subject.clone());
        }
        if o.mass_class != MassClass::from_footprint(d, opts.large_object_threshold) {
            r.push(IssueCode::MassClassMismatch, format!("{path}.mass_class"), subject);
        }
    }

    for (i, e) in g.exits.iter().enumerate() {
        if g.room.door(e).is_none() {
            r.push(IssueCode::DanglingExit, format!("exits[{i}]"), Some(e.clone()));
        }
    }
    r
}

fn validate_room(g: &SceneGraph, r: &mut ValidationReport) {
    let room = &g.room;
    let poly = &room.floor_polygon;
    if !room.height.is_finite() || room.height <= 0.0 {
        r.push(IssueCode::NonpositiveRoomHeight, "room.height".into(), None);
    }
    if poly.iter().any(|p| !p.x.is_finite() || !p.z.is_finite()) {
        r.push(IssueCode::NonFinite, "room.floor_polygon".into(), None);
        return;
    }
    if poly.len() < 3 {
        r.push(IssueCode::PolygonTooFewVertices, "room.floor_polygon".into(), None);
    } else {
        if !is_simple(poly) {
            r.push(IssueCode::PolygonSelfIntersecting, "room.floor_polygon".into(), None);
        }
        if room.signed_area() <= 0.0 {
            r.push(IssueCode::PolygonNotCounterClockwise, "room.floor_polygon".into(), None);
        }
    }

    let mut door_ids = HashSet::new();
    for (i, d) in room.doors.iter().enumerate() {
        let path = format!("room.doors[{i}]");
        let subject = Some(d.id.clone());
        if d.id.is_empty() {
            r.push(IssueCode::EmptyId, format!("{path}.id"), None);
        } else if !door_ids.insert(d.id.as_str()) {
            r.push(IssueCode::DuplicateDoorId, format!("{path}.id"), subject.clone());
        }
        if !d.width.is_finite() || d.width <= 0.0 {
            r.push(IssueCode::NonpositiveDoorWidth, format!("{path}.width"), subject.clone());
        }
        let Some((a, b)) = room.wall(d.wall_index).filter(|_| poly.len() >= 3) else {
            r.push(IssueCode::WallIndexOutOfRange, format!("{path}.wall_index"), subject);
            continue;
        };
        if !d.center.x.is_finite() || !d.center.z.is_finite() {
            r.push(IssueCode::NonFinite, format!("{path}.center"), subject);
            continue;
        }
        if dist_to_segment(d.center, a, b) > WALL_TOLERANCE {
            r.push(IssueCode::DoorOffWall, format!("{path}.center"), subject);
            continue;
        }
        if d.width > 0.0 {
            let len = a.dist(b);
            let t = (d.center - a).dot(b - a) / len;
            let half = d.width / 2.0;
            if t - half < -WALL_TOLERANCE || t + half > len + WALL_TOLERANCE {
                r.push(IssueCode::DoorExceedsWall, format!("{path}.width"), subject);
            }
        }
    }
}

pub(crate) fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab.scale(t))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.z >= a.z.min(b.z) && p.z <= a.z.max(b.z)
}

pub(crate) fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// No two non-adjacent edges meet, and no edge is degenerate.
fn is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(a, b, poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    // Adjacent edges folding back onto each other.
    for i in 0..n {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        if orient(a, b, c) == 0.0 && (b - a).dot(c - b) < 0.0 {
            return false;
        }
    }
    true
}
