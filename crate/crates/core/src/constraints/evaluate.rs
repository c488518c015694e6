use serde::{Deserialize, Serialize};

use super::{Constraint, ConstraintError, ConstraintSet, Kind, Severity};
use crate::geometry::{
    self, clearance_map_walled, door_access_region, door_blocked, flood, footprint_within_room, occupancy_grid,
    usable_cells_walled, widest_path, world_aabb, Cell, GeometryParams, OccupancyGrid,
};
use crate::scene::SceneGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub id: String,
    pub severity: Severity,
    pub satisfied: bool,
    /// Positive: slack. Negative: size of the violation.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub results: Vec<ConstraintResult>,
    pub overall_hard_ok: bool,
}

impl ConstraintReport {
    pub fn get(&self, id: &str) -> Option<&ConstraintResult> {
        self.results.iter().find(|r| r.id == id)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintResult> {
        self.results.iter().filter(|r| !r.satisfied)
    }
}

fn dangling(cs: &ConstraintSet, g: &SceneGraph) -> Result<(), ConstraintError> {
    for c in &cs.constraints {
        if let Some(door) = c.text("door") {
            if g.room.door(door).is_none() {
                return Err(ConstraintError::DanglingReference(door.to_string()));
            }
        }
        if c.kind == Kind::Proximity {
            for key in ["a", "b"] {
                let id = c.text(key).unwrap_or_default();
                if g.object(id).is_none() {
                    return Err(ConstraintError::DanglingReference(id.to_string()));
                }
            }
        }
    }
    Ok(())
}

struct Ctx<'a> {
    g: &'a SceneGraph,
    geo: &'a GeometryParams,
    grid: Option<OccupancyGrid>,
}

impl Ctx<'_> {
    fn grid(&mut self) -> &OccupancyGrid {
        let (g, cell) = (self.g, self.geo.grid_cell);
        self.grid.get_or_insert_with(|| occupancy_grid(g, cell).expect("grid cell size validated"))
    }
}

/// Evaluates every constraint in `cs` against `g`.
pub fn evaluate(cs: &ConstraintSet, g: &SceneGraph, geo: &GeometryParams) -> Result<ConstraintReport, ConstraintError> {
    for (name, v) in [
        ("grid_cell", geo.grid_cell),
        ("raster", geo.raster),
        ("door_depth", geo.door_depth),
        ("clearance_radius", geo.clearance_radius),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConstraintError::Schema { id: "geometry".into(), message: format!("`{name}` must be positive") });
        }
    }
    dangling(cs, g)?;
    let mut ctx = Ctx { g, geo, grid: None };
    let mut results = Vec::with_capacity(cs.constraints.len());
    for c in &cs.constraints {
        let (satisfied, margin, detail) = match c.kind {
            Kind::NoOverlap => no_overlap(&ctx),
            Kind::MinClearance => min_clearance(c, &mut ctx),
            Kind::GridAlignment => grid_alignment(c, &ctx),
            Kind::Proximity => proximity(c, &ctx),
            Kind::ExitUnobstructed => exit_unobstructed(c, &mut ctx),
            Kind::DoorBlockedByLarge => door_blocked_by_large(c, &ctx)?,
            Kind::Custom => custom(c, &ctx),
        };
        results.push(ConstraintResult { id: c.id.clone(), severity: c.severity, satisfied, margin, detail });
    }
    let overall_hard_ok = results.iter().all(|r| r.severity == Severity::Soft || r.satisfied);
    Ok(ConstraintReport { results, overall_hard_ok })
}

type Verdict = (bool, f64, String);

fn no_overlap(ctx: &Ctx) -> Verdict {
    let pairs = geometry::pairwise_collisions(ctx.g, ctx.geo.eps);
    if pairs.is_empty() {
        (true, 1.0, "no interpenetrating pairs".into())
    } else {
        let list: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}+{b}")).collect();
        (false, -(pairs.len() as f64), format!("{} colliding pairs: {}", pairs.len(), list.join(", ")))
    }
}

/// Largest clearance available anywhere in free space, or, with a `door`
/// param, the bottleneck clearance of the widest route from the most open
/// point of the room to that door's access region.
fn min_clearance(c: &Constraint, ctx: &mut Ctx) -> Verdict {
    let threshold = c.number("threshold").unwrap_or(0.0);
    let (g, depth) = (ctx.g, ctx.geo.door_depth);
    let grid = ctx.grid().clone();
    let clearance = clearance_map_walled(&grid);
    let free = |i: usize| grid.cells[i] == Cell::Free;
    let best = (0..clearance.len()).filter(|&i| free(i)).max_by(|&a, &b| clearance[a].total_cmp(&clearance[b]).then(b.cmp(&a)));
    let Some(start) = best else {
        return (false, -threshold, "room has no free floor".into());
    };
    let available = match c.text("door").and_then(|d| g.room.door(d)) {
        None => clearance[start],
        Some(door) => {
            let region = door_access_region(&g.room, door, depth).expect("depth validated");
            let targets: Vec<bool> = (0..grid.cells.len())
                .map(|i| free(i) && region.contains(grid.cell_center(i % grid.cols, i / grid.cols)))
                .collect();
            widest_path(&grid, &clearance, start, &targets).unwrap_or(0.0)
        }
    };
    let margin = available - threshold;
    (margin >= 0.0, margin, format!("available clearance {available:.3} m vs required {threshold:.3} m"))
}

fn grid_alignment(c: &Constraint, ctx: &Ctx) -> Verdict {
    let pitch = c.number("pitch").unwrap_or(1.0);
    let tolerance = c.number("tolerance").unwrap_or(0.0);
    let off = |v: f64| (v - (v / pitch).round() * pitch).abs();
    let worst = ctx.g.objects.iter().filter(|o| o.movable).map(|o| off(o.position.x).max(off(o.position.z))).fold(0.0, f64::max);
    let margin = tolerance - worst;
    (margin >= 0.0, margin, format!("largest lattice offset {worst:.3} m"))
}

fn proximity(c: &Constraint, ctx: &Ctx) -> Verdict {
    let a = ctx.g.object(c.text("a").unwrap_or_default()).expect("checked for dangling ids");
    let b = ctx.g.object(c.text("b").unwrap_or_default()).expect("checked for dangling ids");
    let d = a.position.ground().dist(b.position.ground());
    let margin = c.number("max_distance").unwrap_or(0.0) - d;
    (margin >= 0.0, margin, format!("{} to {} is {d:.3} m", a.id, b.id))
}

/// Path at agent clearance from the usable cell nearest the room centroid to
/// any usable cell in the door's access region.
fn exit_unobstructed(c: &Constraint, ctx: &mut Ctx) -> Verdict {
    let (g, geo) = (ctx.g, *ctx.geo);
    let door = g.room.door(c.text("door").unwrap_or_default()).expect("checked for dangling ids");
    let grid = ctx.grid().clone();
    let usable = usable_cells_walled(&grid, geo.clearance_radius);
    let centroid = g.room.centroid();
    let centre = |i: usize| grid.cell_center(i % grid.cols, i / grid.cols);
    let start = (0..usable.len())
        .filter(|&i| usable[i])
        .min_by(|&a, &b| centre(a).dist(centroid).total_cmp(&centre(b).dist(centroid)).then(a.cmp(&b)));
    let Some(start) = start else {
        return (false, -1.0, "no standing room at agent clearance".into());
    };
    let region = door_access_region(&g.room, door, geo.door_depth).expect("depth validated");
    let reached = flood(&usable, grid.cols, grid.rows, [start]);
    let ok = (0..usable.len()).any(|i| reached[i] && region.contains(centre(i)));
    if ok {
        (true, 1.0, format!("route to {} exists", door.id))
    } else {
        (false, -1.0, format!("no route to {} at {:.2} m clearance", door.id, geo.clearance_radius))
    }
}

/// margin = coverage − required − (0 if impassable with a large blocker, else 1).
fn door_blocked_by_large(c: &Constraint, ctx: &Ctx) -> Result<Verdict, ConstraintError> {
    let door = c.text("door").unwrap_or_default();
    let threshold = c.number("large_object_threshold").unwrap_or(0.0);
    let required = c.number("required_coverage").unwrap_or(0.0);
    let geo = ctx.geo;
    let b = door_blocked(ctx.g, door, geo.door_depth, geo.clearance_radius, geo.raster)
        .map_err(|e| ConstraintError::Schema { id: c.id.clone(), message: e.to_string() })?;
    let large: Vec<&str> = b
        .blocking_ids
        .iter()
        .filter(|id| ctx.g.object(id).is_some_and(|o| o.dims.footprint_area() >= threshold))
        .map(String::as_str)
        .collect();
    let success = b.blocked && !large.is_empty();
    let margin = b.coverage - required - if success { 0.0 } else { 1.0 };
    let satisfied = success && b.coverage >= required;
    let detail = format!(
        "coverage {:.3}, {}, large blockers [{}]",
        b.coverage,
        if b.blocked { "impassable" } else { "passable" },
        large.join(", ")
    );
    Ok((satisfied, margin, detail))
}

fn custom(c: &Constraint, ctx: &Ctx) -> Verdict {
    match c.text("check") {
        Some("within_room") => {
            let outside: Vec<&str> = ctx
                .g
                .objects
                .iter()
                .filter(|o| !footprint_within_room(&ctx.g.room, &world_aabb(o), ctx.geo.eps))
                .map(|o| o.id.as_str())
                .collect();
            if outside.is_empty() {
                (true, 1.0, "all footprints inside the room".into())
            } else {
                (false, -(outside.len() as f64), format!("outside the room: {}", outside.join(", ")))
            }
        }
        other => (true, 0.0, format!("not machine-checked ({})", other.unwrap_or("none"))),
    }
}
