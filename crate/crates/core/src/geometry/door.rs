use serde::{Deserialize, Serialize};

use super::grid::{flood, usable_from_mask};
use super::{require_positive, world_aabb, GeometryError};
use crate::scene::{Door, Point2, Room, SceneGraph};

/// Rectangle in front of a door on the room side: `width` along the wall,
/// `depth` along the inward normal, flush against the wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessRegion {
    pub center: Point2,
    /// Unit vector along the wall.
    pub along: Point2,
    /// Unit inward normal.
    pub inward: Point2,
    pub width: f64,
    pub depth: f64,
}

impl AccessRegion {
    /// Local `(u, n)` → world, with `u` measured from the door centre along the
    /// wall and `n` inward from the wall.
    pub fn to_world(&self, u: f64, n: f64) -> Point2 {
        self.center + self.along.scale(u) + self.inward.scale(n)
    }

    /// Wall-side corners first, then the interior corners; counter-clockwise.
    pub fn corners(&self) -> [Point2; 4] {
        let h = self.width / 2.0;
        [self.to_world(-h, 0.0), self.to_world(h, 0.0), self.to_world(h, self.depth), self.to_world(-h, self.depth)]
    }

    pub fn contains(&self, p: Point2) -> bool {
        let d = p - self.center;
        let (u, n) = (d.dot(self.along), d.dot(self.inward));
        u.abs() <= self.width / 2.0 && (0.0..=self.depth).contains(&n)
    }
}

pub fn door_access_region(room: &Room, door: &Door, depth: f64) -> Result<AccessRegion, GeometryError> {
    require_positive("depth", depth)?;
    let (a, b) = room.wall(door.wall_index).ok_or_else(|| GeometryError::BadWall(door.id.clone()))?;
    let len = a.dist(b);
    if len == 0.0 {
        return Err(GeometryError::BadWall(door.id.clone()));
    }
    let along = (b - a).scale(1.0 / len);
    // Interior lies to the left of each edge of a counter-clockwise polygon.
    let inward = Point2::new(-along.z, along.x);
    Ok(AccessRegion { center: door.center, along, inward, width: door.width, depth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockageResult {
    /// Fraction of access-region raster cells covered by object footprints.
    pub coverage: f64,
    /// A disc of the clearance radius can cross from the doorway edge of the
    /// region to its interior edge.
    pub passable: bool,
    pub blocked: bool,
    /// Objects covering at least one region cell, sorted by id.
    pub blocking_ids: Vec<String>,
}

/// Rasterizes the access region of `door_id` at `raster` pitch and tests
/// whether a disc of `clearance_radius` can walk through it.
///
/// Obstacles are world-AABB footprints. The obstacle raster extends one
/// clearance radius beyond the region on every side so that furniture just
/// outside the region still pinches the disc; disc centres must stay inside
/// the region. The crossing runs from the wall-side row to the far row.
pub fn door_blocked(
    g: &SceneGraph,
    door_id: &str,
    depth: f64,
    clearance_radius: f64,
    raster: f64,
) -> Result<BlockageResult, GeometryError> {
    require_positive("clearance_radius", clearance_radius)?;
    require_positive("raster", raster)?;
    let door = g.room.door(door_id).ok_or_else(|| GeometryError::UnknownDoor(door_id.into()))?;
    let region = door_access_region(&g.room, door, depth)?;

    let nu = ((region.width / raster) - 1e-6).ceil().max(1.0) as usize;
    let nn = ((region.depth / raster) - 1e-6).ceil().max(1.0) as usize;
    let margin = (clearance_radius / raster).ceil() as usize;
    let (cols, rows) = (nu + 2 * margin, nn + 2 * margin);

    let boxes: Vec<_> = g.objects.iter().map(|o| (o.id.as_str(), world_aabb(o))).collect();
    let mut occ = vec![false; cols * rows];
    let mut covered = 0usize;
    let mut blockers: Vec<&str> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let u = (c as f64 - margin as f64 + 0.5) * raster - region.width / 2.0;
            let n = (r as f64 - margin as f64 + 0.5) * raster;
            let p = region.to_world(u, n);
            let in_region = (margin..margin + nu).contains(&c) && (margin..margin + nn).contains(&r);
            let mut hit = false;
            for (id, b) in &boxes {
                if b.footprint_contains(p) {
                    hit = true;
                    if in_region && !blockers.contains(id) {
                        blockers.push(id);
                    } else if !in_region {
                        break;
                    }
                }
            }
            occ[r * cols + c] = hit;
            if hit && in_region {
                covered += 1;
            }
        }
    }

    let mut usable = usable_from_mask(&occ, cols, rows, clearance_radius / raster);
    for r in 0..rows {
        for c in 0..cols {
            if !((margin..margin + nu).contains(&c) && (margin..margin + nn).contains(&r)) {
                usable[r * cols + c] = false;
            }
        }
    }
    let seeds = (margin..margin + nu).map(|c| margin * cols + c);
    let reached = flood(&usable, cols, rows, seeds);
    let far_row = margin + nn - 1;
    let passable = (margin..margin + nu).any(|c| reached[far_row * cols + c]);

    let mut blocking_ids: Vec<String> = blockers.into_iter().map(String::from).collect();
    blocking_ids.sort();
    Ok(BlockageResult { coverage: covered as f64 / (nu * nn) as f64, passable, blocked: !passable, blocking_ids })
}
