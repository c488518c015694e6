//! World-space bounding boxes, overlap tests, occupancy rasters, door
//! blockage, and navigability.
//!
//! Object-object collision uses full 3D boxes; everything that concerns
//! walking (occupancy, clearance, door blockage) uses 2D footprints.

mod door;
mod grid;

pub use door::{door_access_region, door_blocked, AccessRegion, BlockageResult};
pub use grid::{clearance_map, occupancy_grid, path_exists, usable_cells, Cell, OccupancyGrid, INFLATION_SLACK};
pub(crate) use grid::{clearance_map_walled, flood, usable_cells_walled, widest_path};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::validate::segments_intersect;
use crate::scene::{Point2, Point3, Room, SceneGraph, SceneObject};

pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("`{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("unknown door `{0}`")]
    UnknownDoor(String),
    #[error("door `{0}` references a wall that does not exist")]
    BadWall(String),
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { name, value })
    }
}

/// Tunables shared by the geometry kernel and the constraint evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Penetration (m) below which touching boxes do not collide.
    pub eps: f64,
    /// Depth (m) of the door access region into the room.
    pub door_depth: f64,
    /// Radius (m) of the disc that stands in for a person.
    pub clearance_radius: f64,
    /// Raster pitch (m) inside door access regions.
    pub raster: f64,
    /// Cell size (m) of room-wide occupancy grids.
    pub grid_cell: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self { eps: DEFAULT_EPS, door_depth: 0.6, clearance_radius: 0.25, raster: 0.01, grid_cell: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn volume(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y) * (self.max.z - self.min.z)
    }

    pub fn extents(&self) -> Point3 {
        Point3::new(self.max.x - self.min.x, self.max.y - self.min.y, self.max.z - self.min.z)
    }

    /// Closed containment test on the floor plane.
    pub fn footprint_contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.z >= self.min.z && p.z <= self.max.z
    }
}

/// Sine and cosine of an angle in degrees, exact at quarter turns.
pub(crate) fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r % 90.0 == 0.0 {
        match (r / 90.0) as u32 {
            0 | 4 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

/// The four footprint corners of `o` in world coordinates, counter-clockwise.
///
/// Local `(lx, lz)` maps to world `(x, z) = (lx cosψ + lz sinψ, −lx sinψ + lz cosψ)`,
/// the right-handed rotation about +y.
pub fn footprint_corners(o: &SceneObject) -> [Point2; 4] {
    let (s, c) = sin_cos_deg(o.yaw);
    let (hw, hd) = (o.dims.width / 2.0, o.dims.depth / 2.0);
    let centre = o.position.ground();
    [(-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd)]
        .map(|(lx, lz)| Point2::new(centre.x + lx * c + lz * s, centre.z - lx * s + lz * c))
}

pub fn world_aabb(o: &SceneObject) -> Aabb {
    let (s, c) = sin_cos_deg(o.yaw);
    let (s, c) = (s.abs(), c.abs());
    let (hw, hd) = (o.dims.width / 2.0, o.dims.depth / 2.0);
    let hx = c * hw + s * hd;
    let hz = s * hw + c * hd;
    let hy = o.dims.height / 2.0;
    let p = o.position;
    Aabb { min: Point3::new(p.x - hx, p.y - hy, p.z - hz), max: Point3::new(p.x + hx, p.y + hy, p.z + hz) }
}

/// True iff the boxes interpenetrate by more than `eps` along every axis.
pub fn aabb_overlap(a: &Aabb, b: &Aabb, eps: f64) -> bool {
    let pen = |amin: f64, amax: f64, bmin: f64, bmax: f64| amax.min(bmax) - amin.max(bmin);
    pen(a.min.x, a.max.x, b.min.x, b.max.x) > eps
        && pen(a.min.y, a.max.y, b.min.y, b.max.y) > eps
        && pen(a.min.z, a.max.z, b.min.z, b.max.z) > eps
}

/// Footprint-only variant of [`aabb_overlap`].
pub fn footprint_overlap(a: &Aabb, b: &Aabb, eps: f64) -> bool {
    a.max.x.min(b.max.x) - a.min.x.max(b.min.x) > eps && a.max.z.min(b.max.z) - a.min.z.max(b.min.z) > eps
}

/// Whether the footprint of `b`, shrunk by `tol` on each side, lies inside the
/// floor polygon. Footprints flush against a wall pass.
pub fn footprint_within_room(room: &Room, b: &Aabb, tol: f64) -> bool {
    let (x0, x1) = (b.min.x + tol, b.max.x - tol);
    let (z0, z1) = (b.min.z + tol, b.max.z - tol);
    if x0 > x1 || z0 > z1 {
        return room.contains(Point2::new((b.min.x + b.max.x) / 2.0, (b.min.z + b.max.z) / 2.0));
    }
    let rect = [Point2::new(x0, z0), Point2::new(x1, z0), Point2::new(x1, z1), Point2::new(x0, z1)];
    if !rect.iter().all(|p| room.contains(*p)) {
        return false;
    }
    let poly = &room.floor_polygon;
    if poly.iter().any(|v| v.x > x0 && v.x < x1 && v.z > z0 && v.z < z1) {
        return false;
    }
    let n = poly.len();
    (0..n).all(|i| {
        let (a, c) = (poly[i], poly[(i + 1) % n]);
        (0..4).all(|k| !segments_intersect(a, c, rect[k], rect[(k + 1) % 4]))
    })
}

/// Every colliding unordered pair, each as `(smaller id, larger id)`, sorted.
///
/// Sweep-and-prune on x: a pair whose x-intervals do not overlap cannot
/// penetrate by more than `eps >= 0`.
pub fn pairwise_collisions(g: &SceneGraph, eps: f64) -> Vec<(String, String)> {
    let boxes: Vec<(Aabb, &str)> = g.objects.iter().map(|o| (world_aabb(o), o.id.as_str())).collect();
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[i].0.min.x.total_cmp(&boxes[j].0.min.x));

    let mut out = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let (a, ida) = &boxes[i];
        for &j in &order[k + 1..] {
            let (b, idb) = &boxes[j];
            if b.min.x >= a.max.x {
                break;
            }
            if aabb_overlap(a, b, eps) {
                let pair = if ida <= idb { (ida, idb) } else { (idb, ida) };
                out.push((pair.0.to_string(), pair.1.to_string()));
            }
        }
    }
    out.sort();
    out
}

/// Ids of every object in `g` (other than `skip`) that `candidate` collides with.
pub fn colliders(g: &SceneGraph, candidate: &Aabb, skip: &str, eps: f64) -> Vec<String> {
    let mut ids: Vec<String> =
        g.objects.iter().filter(|o| o.id != skip && aabb_overlap(candidate, &world_aabb(o), eps)).map(|o| o.id.clone()).collect();
    ids.sort();
    ids
}
