#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::Rng;
use scene_agents::geometry::{Cell, OccupancyGrid};
use scene_agents::scene::{parse_scene, Dims, Door, Point2, Point3, Room, SceneGraph, SceneObject, SCHEMA_VERSION};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_scene(stem: &str) -> SceneGraph {
    let text = std::fs::read_to_string(fixtures().join("scenes").join(format!("{stem}.json"))).unwrap();
    parse_scene(&text).unwrap()
}

pub const FIXTURE_STEMS: [&str; 6] = ["bedroom", "classroom", "kitchen", "living_room", "office", "study"];

pub fn room(poly: &[(f64, f64)], door: (usize, (f64, f64), f64)) -> Room {
    Room {
        floor_polygon: poly.iter().map(|&(x, z)| Point2::new(x, z)).collect(),
        height: 2.7,
        doors: vec![Door { id: "door_0".into(), wall_index: door.0, center: Point2::new(door.1 .0, door.1 .1), width: door.2 }],
        windows: vec![],
    }
}

pub fn scene(room: Room, objects: Vec<SceneObject>) -> SceneGraph {
    SceneGraph { schema_version: SCHEMA_VERSION.into(), room, objects, exits: vec!["door_0".into()] }
}

pub fn block(id: &str, x: f64, z: f64, w: f64, d: f64, yaw: f64) -> SceneObject {
    SceneObject::new(id, "box", Point3::new(x, 0.5, z), yaw, Dims::new(w, 1.0, d), true)
}

/// Random rectangular or L-shaped room with random furniture. Half the
/// objects sit on a quarter-metre lattice at quarter turns, so exact
/// contact configurations occur often.
pub fn random_scene(rng: &mut impl Rng) -> SceneGraph {
    random_scene_with(rng, 13)
}

/// As [`random_scene`] with up to `max_objects` objects.
pub fn random_scene_with(rng: &mut impl Rng, max_objects: usize) -> SceneGraph {
    let (w, d) = (rng.gen_range(2.0..8.0), rng.gen_range(2.0..8.0));
    let poly: Vec<(f64, f64)> = if rng.gen_bool(0.3) {
        let (cx, cz) = (w * rng.gen_range(0.4..0.8), d * rng.gen_range(0.4..0.8));
        vec![(0.0, 0.0), (w, 0.0), (w, cz), (cx, cz), (cx, d), (0.0, d)]
    } else {
        vec![(0.0, 0.0), (w, 0.0), (w, d), (0.0, d)]
    };
    let n = rng.gen_range(0..=max_objects);
    let objects = (0..n)
        .map(|i| {
            let id = format!("obj_{i}");
            if rng.gen_bool(0.5) {
                let q = |rng: &mut dyn rand::RngCore, lo: i32, hi: i32| rng.gen_range(lo..hi) as f64 * 0.25;
                let (bw, bd) = (q(rng, 1, 8), q(rng, 1, 8));
                let (x, z) = (q(rng, 0, (w * 4.0) as i32), q(rng, 0, (d * 4.0) as i32));
                let yaw = [0.0, 90.0, 180.0, 270.0][rng.gen_range(0..4)];
                let h = q(rng, 1, 8);
                SceneObject::new(id, "box", Point3::new(x, h / 2.0, z), yaw, Dims::new(bw, h, bd), true)
            } else {
                let dims = Dims::new(rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0));
                let p = Point3::new(rng.gen_range(0.0..w), rng.gen_range(0.0..1.0), rng.gen_range(0.0..d));
                SceneObject::new(id, "box", p, rng.gen_range(0.0..360.0), dims, true)
            }
        })
        .collect();
    scene(room(&poly, (0, (w / 2.0, 0.0), 0.8)), objects)
}

fn rot(yaw: f64) -> (f64, f64) {
    match yaw {
        0.0 => (0.0, 1.0),
        90.0 => (1.0, 0.0),
        180.0 => (0.0, -1.0),
        270.0 => (-1.0, 0.0),
        y => y.to_radians().sin_cos(),
    }
}

/// Axis-aligned bounds from the four rotated corners: ([x0, y0, z0], [x1, y1, z1]).
pub fn oracle_bounds(o: &SceneObject) -> ([f64; 3], [f64; 3]) {
    let (s, c) = rot(o.yaw);
    let (hw, hd) = (o.dims.width / 2.0, o.dims.depth / 2.0);
    let pts: Vec<(f64, f64)> = [(-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd)]
        .iter()
        .map(|&(lx, lz)| (o.position.x + lx * c + lz * s, o.position.z - lx * s + lz * c))
        .collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, k: usize| pts.iter().map(|p| if k == 0 { p.0 } else { p.1 }).fold(init, f);
    let hy = o.dims.height / 2.0;
    (
        [fold(f64::min, f64::INFINITY, 0), o.position.y - hy, fold(f64::min, f64::INFINITY, 1)],
        [fold(f64::max, f64::NEG_INFINITY, 0), o.position.y + hy, fold(f64::max, f64::NEG_INFINITY, 1)],
    )
}

/// All-pairs collision check on corner-derived boxes.
pub fn oracle_collisions(g: &SceneGraph, eps: f64) -> Vec<(String, String)> {
    let boxes: Vec<_> = g.objects.iter().map(oracle_bounds).collect();
    let mut out = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (a, b) = (boxes[i], boxes[j]);
            if (0..3).all(|k| a.1[k].min(b.1[k]) - a.0[k].max(b.0[k]) > eps) {
                let (x, y) = (&g.objects[i].id, &g.objects[j].id);
                out.push(if x <= y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) });
            }
        }
    }
    out.sort();
    out
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dz) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dz) / (dx * dx + dz * dz)).clamp(0.0, 1.0);
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dz).powi(2)).sqrt()
}

/// Crossing-number point-in-polygon; `None` within `tol` of an edge.
pub fn oracle_inside(poly: &[Point2], p: (f64, f64), tol: f64) -> Option<bool> {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = ((poly[i].x, poly[i].z), (poly[(i + 1) % n].x, poly[(i + 1) % n].z));
        if seg_dist(p, a, b) <= tol {
            return None;
        }
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1) {
            inside = !inside;
        }
    }
    Some(inside)
}

/// Independent rasterization: per cell, `Some(occupied)` or `None` when the
/// centre lies on a boundary within `tol`.
pub fn oracle_occupancy(g: &SceneGraph, cs: f64, tol: f64) -> (usize, usize, Vec<Option<bool>>) {
    let xs: Vec<f64> = g.room.floor_polygon.iter().map(|p| p.x).collect();
    let zs: Vec<f64> = g.room.floor_polygon.iter().map(|p| p.z).collect();
    let (x0, z0) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), zs.iter().cloned().fold(f64::INFINITY, f64::min));
    let (x1, z1) = (xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let cols = (((x1 - x0) / cs) - 1e-9).ceil().max(1.0) as usize;
    let rows = (((z1 - z0) / cs) - 1e-9).ceil().max(1.0) as usize;
    let boxes: Vec<_> = g.objects.iter().map(oracle_bounds).collect();
    let mut cells = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let p = (x0 + (c as f64 + 0.5) * cs, z0 + (r as f64 + 0.5) * cs);
            let Some(inside) = oracle_inside(&g.room.floor_polygon, p, tol) else {
                cells.push(None);
                continue;
            };
            let (mut hit, mut ambiguous) = (false, false);
            for (lo, hi) in &boxes {
                let dx = (p.0 - lo[0]).min(hi[0] - p.0);
                let dz = (p.1 - lo[2]).min(hi[2] - p.1);
                if dx > tol && dz > tol {
                    hit = true;
                } else if dx >= -tol && dz >= -tol {
                    ambiguous = true;
                }
            }
            cells.push(if !inside || hit {
                Some(true)
            } else if ambiguous {
                None
            } else {
                Some(false)
            });
        }
    }
    (cols, rows, cells)
}

pub fn random_grid(rng: &mut impl Rng) -> (OccupancyGrid, f64) {
    let (cols, rows) = (rng.gen_range(3..40), rng.gen_range(3..40));
    let cs = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
    let mut grid = OccupancyGrid::new(Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)), cs, cols, rows);
    let density = rng.gen_range(0.0..0.45);
    for r in 0..rows {
        for c in 0..cols {
            if rng.gen_bool(density) {
                grid.set(c, r, Cell::Occupied);
            }
        }
    }
    let radius = cs * [0.0, 0.5, 1.0, 1.5, 2.0, 2.5][rng.gen_range(0..6)];
    (grid, radius)
}

/// Brute-force inflation plus breadth-first search.
pub fn oracle_path(grid: &OccupancyGrid, start: (usize, usize), goal: (usize, usize), radius: f64) -> bool {
    let (cols, rows) = (grid.cols, grid.rows);
    let occupied: Vec<(i64, i64)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c, r)))
        .filter(|&(c, r)| grid.get(c, r) == Cell::Occupied)
        .map(|(c, r)| (c as i64, r as i64))
        .collect();
    let limit = (radius / grid.cell_size).powi(2) + 1e-9;
    let usable = |c: usize, r: usize| {
        grid.get(c, r) == Cell::Free
            && occupied.iter().all(|&(oc, or)| (((oc - c as i64).pow(2) + (or - r as i64).pow(2)) as f64) > limit)
    };
    if !usable(start.0, start.1) || !usable(goal.0, goal.1) {
        return false;
    }
    let mut seen = vec![vec![false; cols]; rows];
    let mut q = VecDeque::from([start]);
    seen[start.1][start.0] = true;
    while let Some((c, r)) = q.pop_front() {
        if (c, r) == goal {
            return true;
        }
        let steps = [(c.wrapping_sub(1), r), (c + 1, r), (c, r.wrapping_sub(1)), (c, r + 1)];
        for (nc, nr) in steps {
            if nc < cols && nr < rows && !seen[nr][nc] && usable(nc, nr) {
                seen[nr][nc] = true;
                q.push_back((nc, nr));
            }
        }
    }
    false
}

/// Disc-crossing oracle for a door access region: rasterize at `raster`
/// with a margin of `radius` around the region, inflate by brute force
/// over a local window, then search from the wall-side row to the far row.
pub fn oracle_door_passable(g: &SceneGraph, door_id: &str, depth: f64, radius: f64, raster: f64) -> (f64, bool) {
    let door = g.room.doors.iter().find(|d| d.id == door_id).unwrap();
    let poly = &g.room.floor_polygon;
    let (a, b) = (poly[door.wall_index], poly[(door.wall_index + 1) % poly.len()]);
    let len = ((b.x - a.x).powi(2) + (b.z - a.z).powi(2)).sqrt();
    let along = ((b.x - a.x) / len, (b.z - a.z) / len);
    let inward = (-along.1, along.0);
    let nu = ((door.width / raster) - 1e-6).ceil().max(1.0) as usize;
    let nn = ((depth / raster) - 1e-6).ceil().max(1.0) as usize;
    let m = (radius / raster).ceil() as usize;
    let (cols, rows) = (nu + 2 * m, nn + 2 * m);
    let boxes: Vec<_> = g.objects.iter().map(oracle_bounds).collect();
    let in_region = |c: usize, r: usize| c >= m && c < m + nu && r >= m && r < m + nn;
    let mut occ = vec![false; cols * rows];
    let mut covered = 0;
    for r in 0..rows {
        for c in 0..cols {
            let u = (c as f64 - m as f64 + 0.5) * raster - door.width / 2.0;
            let n = (r as f64 - m as f64 + 0.5) * raster;
            let p = (door.center.x + along.0 * u + inward.0 * n, door.center.z + along.1 * u + inward.1 * n);
            let hit = boxes.iter().any(|(lo, hi)| p.0 >= lo[0] && p.0 <= hi[0] && p.1 >= lo[2] && p.1 <= hi[2]);
            occ[r * cols + c] = hit;
            covered += usize::from(hit && in_region(c, r));
        }
    }
    let limit = (radius / raster).powi(2) + 1e-9;
    let w = m as i64 + 1;
    let usable: Vec<bool> = (0..rows * cols)
        .map(|i| {
            let (c, r) = ((i % cols) as i64, (i / cols) as i64);
            if !in_region(c as usize, r as usize) || occ[i] {
                return false;
            }
            for dr in -w..=w {
                for dc in -w..=w {
                    let (oc, or) = (c + dc, r + dr);
                    let inside = oc >= 0 && or >= 0 && (oc as usize) < cols && (or as usize) < rows;
                    if inside && occ[or as usize * cols + oc as usize] && ((dc * dc + dr * dr) as f64) <= limit {
                        return false;
                    }
                }
            }
            true
        })
        .collect();
    let mut seen = vec![false; rows * cols];
    let mut q: VecDeque<usize> = (m..m + nu).map(|c| m * cols + c).filter(|&i| usable[i]).collect();
    for &i in &q {
        seen[i] = true;
    }
    let mut passable = false;
    while let Some(i) = q.pop_front() {
        let (c, r) = (i % cols, i / cols);
        if r == m + nn - 1 {
            passable = true;
            break;
        }
        for j in [i.wrapping_sub(1), i + 1, i.wrapping_sub(cols), i + cols] {
            let ok = j < rows * cols && (j % cols).abs_diff(c) + (j / cols).abs_diff(r) == 1;
            if ok && usable[j] && !seen[j] {
                seen[j] = true;
                q.push_back(j);
            }
        }
    }
    (covered as f64 / (nu * nn) as f64, passable)
}

/// Writes 53 same-named top-down renders for two systems. The first system
/// has a door blocker in 47 scenes, the second in 15; 9 scenes have one in
/// both, so a judge that looks for the blocker prefers the first system in
/// 38 pairs, the second in 6, and ties on 9.
pub fn dce_image_dirs(root: &std::path::Path) -> (PathBuf, PathBuf) {
    use scene_agents::render::{render_topdown, RenderOptions};
    let (a, b) = (root.join("sys_a"), root.join("sys_b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(53);
    for i in 0..53 {
        let base = scene(
            room(&[(0.0, 0.0), (5.0, 0.0), (5.0, 4.0), (0.0, 4.0)], (0, (2.0, 0.0), 0.9)),
            vec![block("table_0", rng.gen_range(2.0..4.0), rng.gen_range(2.0..3.0), 1.2, 0.8, 0.0)],
        );
        let mut blocked = base.clone();
        blocked.objects.push(block("door_blocker", 2.0, 0.35, 1.2, 0.6, 0.0));
        let (in_a, in_b) = match i {
            0..=37 => (true, false),
            38..=43 => (false, true),
            _ => (true, true),
        };
        let svg = |g: &SceneGraph| render_topdown(g, &RenderOptions::default()).unwrap();
        let name = format!("scene_{i:02}.svg");
        std::fs::write(a.join(&name), svg(if in_a { &blocked } else { &base })).unwrap();
        std::fs::write(b.join(&name), svg(if in_b { &blocked } else { &base })).unwrap();
    }
    (a, b)
}

/// The text between the `LEFT:` and `RIGHT:` labels of a judge request, and after `RIGHT:`.
pub fn judge_sides(req: &scene_agents::agents::ChatRequest) -> (String, String) {
    use scene_agents::agents::Part;
    let user = req.messages.iter().find(|m| m.role == "user").unwrap();
    let mut side = 0;
    let (mut left, mut right) = (String::new(), String::new());
    for p in &user.parts {
        match p {
            Part::Text { text } if text == "LEFT:" => side = 1,
            Part::Text { text } if text == "RIGHT:" => side = 2,
            Part::Text { text } if side == 1 => left.push_str(text),
            Part::Text { text } if side == 2 => right.push_str(text),
            Part::Image { data_base64, .. } if side == 1 => left.push_str(data_base64),
            Part::Image { data_base64, .. } if side == 2 => right.push_str(data_base64),
            _ => {}
        }
    }
    (left, right)
}

/// Judge keyed to content: picks the side showing a door blocker, and falls
/// back to "left" when both or neither do.
pub fn content_judge() -> scene_agents::agents::AgentEndpoint {
    use scene_agents::agents::{AgentEndpoint, FnClient, Role};
    AgentEndpoint::new(
        Role::Judge,
        std::sync::Arc::new(FnClient(|req: &scene_agents::agents::ChatRequest| {
            let (l, r) = judge_sides(req);
            let key = "id=\"door_blocker\"";
            Ok(if r.contains(key) && !l.contains(key) { r#"{"choice": "right"}"# } else { r#"{"choice": "left"}"# }.to_string())
        })),
    )
}
