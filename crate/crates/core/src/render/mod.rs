//! Schematic views: top-down SVG floor plans, PGM occupancy rasters,
//! trajectory overlays and a plain-text map for text-only endpoints.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{replay, EpisodeLog, Hash64, Operation, ReplayError};
use crate::geometry::{door_access_region, footprint_corners, occupancy_grid, Cell, OccupancyGrid};
use crate::scene::{Point2, SceneGraph};

const MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    /// Pixels per metre.
    pub scale: f64,
    pub show_labels: bool,
    pub show_doors: bool,
    pub highlight_ids: Vec<String>,
    pub palette_seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { scale: 100.0, show_labels: true, show_doors: true, highlight_ids: Vec::new(), palette_seed: 0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Fill colour keyed on the palette seed and the object id only.
fn color(seed: u64, id: &str) -> String {
    let h = Hash64::of(format!("{seed}:{id}").as_bytes());
    let hue = u64::from_str_radix(&h.as_str()[..8], 16).expect("hex digest") % 360;
    format!("hsl({hue},55%,65%)")
}

struct Frame {
    min: Point2,
    scale: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(g: &SceneGraph, scale: f64) -> Self {
        let (min, max) = g.room.bounds();
        Self { min, scale, width: (max.x - min.x + 2.0 * MARGIN) * scale, height: (max.z - min.z + 2.0 * MARGIN) * scale }
    }

    fn px(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.min.x + MARGIN) * self.scale, (p.z - self.min.z + MARGIN) * self.scale)
    }

    fn points(&self, pts: &[Point2]) -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = self.px(*p);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn document(g: &SceneGraph, opts: &RenderOptions, overlay: impl FnOnce(&Frame, &mut String)) -> Result<String, RenderError> {
    if !(opts.scale > 0.0 && opts.scale.is_finite()) {
        return Err(RenderError::BadScale(opts.scale));
    }
    let f = Frame::new(g, opts.scale);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w = f.width,
        h = f.height
    );
    let _ =
        writeln!(s, r##"<rect class="background" x="0" y="0" width="{:.3}" height="{:.3}" fill="#ffffff"/>"##, f.width, f.height);
    let _ = writeln!(
        s,
        r##"<polygon class="floor" points="{}" fill="#f4f1ea" stroke="#333333" stroke-width="3"/>"##,
        f.points(&g.room.floor_polygon)
    );
    for o in &g.objects {
        let hl = opts.highlight_ids.contains(&o.id);
        let _ = writeln!(
            s,
            r##"<polygon id="{}" class="{}" points="{}" fill="{}" fill-opacity="0.85" stroke="{}" stroke-width="{}"/>"##,
            escape(&o.id),
            if hl { "object highlight" } else { "object" },
            f.points(&footprint_corners(o)),
            color(opts.palette_seed, &o.id),
            if hl { "#d62728" } else { "#222222" },
            if hl { 3 } else { 1 },
        );
    }
    if opts.show_doors {
        for d in &g.room.doors {
            let Ok(region) = door_access_region(&g.room, d, d.width) else { continue };
            let hinge = region.to_world(-d.width / 2.0, 0.0);
            let leaf = region.to_world(-d.width / 2.0, d.width);
            let end = region.to_world(d.width / 2.0, 0.0);
            let sweep = u8::from((leaf - hinge).cross(end - hinge) > 0.0);
            let (hx, hy) = f.px(hinge);
            let (lx, ly) = f.px(leaf);
            let (ex, ey) = f.px(end);
            let r = d.width * opts.scale;
            let _ = writeln!(
                s,
                r##"<path class="door" data-door="{}" d="M {hx:.3} {hy:.3} L {lx:.3} {ly:.3} A {r:.3} {r:.3} 0 0 {sweep} {ex:.3} {ey:.3}" fill="none" stroke="#1f5fbf" stroke-width="2"/>"##,
                escape(&d.id)
            );
        }
        for e in &g.exits {
            let Some(d) = g.room.door(e) else { continue };
            let Ok(region) = door_access_region(&g.room, d, 0.15) else { continue };
            let (x, y) = f.px(region.to_world(0.0, 0.15));
            let _ = writeln!(
                s,
                r##"<circle class="exit" data-door="{}" cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="#2ca02c"/>"##,
                escape(e),
                0.08 * opts.scale
            );
        }
    }
    if opts.show_labels {
        for o in &g.objects {
            let (x, y) = f.px(o.position.ground());
            let _ = writeln!(
                s,
                r##"<text class="label" data-for="{}" x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="{:.3}" text-anchor="middle">{}</text>"##,
                escape(&o.id),
                0.12 * opts.scale,
                escape(&o.id)
            );
        }
    }
    overlay(&f, &mut s);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Top-down schematic of `g`. Object footprints carry the object id as element id.
pub fn render_topdown(g: &SceneGraph, opts: &RenderOptions) -> Result<String, RenderError> {
    document(g, opts, |_, _| {})
}

/// Plain PGM of the grid, identical to [`OccupancyGrid::to_pgm`].
pub fn render_occupancy(grid: &OccupancyGrid) -> String {
    grid.to_pgm()
}

/// Final scene of the replayed log with one polyline per moved object through
/// its start and each accepted move target.
pub fn render_trajectory(g0: &SceneGraph, log: &EpisodeLog, opts: &RenderOptions) -> Result<String, RenderError> {
    let last = replay(g0, log, &log.header().env)?;
    let mut paths: BTreeMap<&str, Vec<(usize, Point2)>> = BTreeMap::new();
    for s in log.steps().filter(|s| s.outcome.accepted) {
        if let Operation::Move { position } = s.action.op {
            let Some(start) = g0.object(&s.action.object_id) else { continue };
            paths
                .entry(start.id.as_str())
                .or_insert_with(|| vec![(0, start.position.ground())])
                .push((s.step, position.ground()));
        }
    }
    document(&last, opts, |f, s| {
        for (id, pts) in &paths {
            let ground: Vec<Point2> = pts.iter().map(|(_, p)| *p).collect();
            let _ = writeln!(
                s,
                r##"<polyline class="trajectory" data-for="{}" points="{}" fill="none" stroke="#d62728" stroke-width="2" stroke-dasharray="6 4"/>"##,
                escape(id),
                f.points(&ground)
            );
            for (step, p) in &pts[1..] {
                let (x, y) = f.px(*p);
                let _ = writeln!(
                    s,
                    r##"<text class="step" data-for="{}" x="{x:.3}" y="{:.3}" font-family="sans-serif" font-size="{:.3}" fill="#d62728">t{step}</text>"##,
                    escape(id),
                    y - 0.1 * f.scale,
                    0.1 * f.scale
                );
            }
        }
    })
}

/// Character map for endpoints without image input: `#` wall or outside,
/// `=` object, `.` free, `D` door access region, one row per line from z = min.
pub fn render_text_map(g: &SceneGraph, cell: f64, door_depth: f64) -> String {
    let Ok(grid) = occupancy_grid(g, cell) else { return String::new() };
    let regions: Vec<_> = g.room.doors.iter().filter_map(|d| door_access_region(&g.room, d, door_depth).ok()).collect();
    let mut s = format!(
        "occupancy map {}x{} cells of {cell} m, origin ({:.2}, {:.2}); columns grow with x, rows with z\n",
        grid.cols, grid.rows, grid.origin.x, grid.origin.z
    );
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let p = grid.cell_center(col, row);
            let ch = if !g.room.contains(p) {
                '#'
            } else if grid.get(col, row) == Cell::Occupied {
                '='
            } else if regions.iter().any(|r| r.contains(p)) {
                'D'
            } else {
                '.'
            };
            s.push(ch);
        }
        s.push('\n');
    }
    s
}
