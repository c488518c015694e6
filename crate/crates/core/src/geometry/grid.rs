use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use super::{require_positive, world_aabb, GeometryError};
use crate::scene::{Point2, SceneGraph};

/// Slack (in squared cell units) added to the inflation radius so that radii
/// that are exact multiples of the cell size behave predictably.
pub const INFLATION_SLACK: f64 = 1e-9;

// Stand-in for "no obstacle"; finite so the distance transform stays NaN-free.
const FAR: f64 = 1e18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Occupied,
}

/// Row-major raster over the floor plane. Column index grows with x, row
/// index with z; cell `(c, r)` spans `origin + [c, c+1) × [r, r+1)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Point2,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(origin: Point2, cell_size: f64, cols: usize, rows: usize) -> Self {
        Self { origin, cell_size, cols, rows, cells: vec![Cell::Free; cols * rows] }
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    pub fn get(&self, col: usize, row: usize) -> Cell {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, cell: Cell) {
        let i = self.index(col, row);
        self.cells[i] = cell;
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(self.origin.x + (col as f64 + 0.5) * self.cell_size, self.origin.z + (row as f64 + 0.5) * self.cell_size)
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let r = ((p.z - self.origin.z) / self.cell_size).floor();
        if c < 0.0 || r < 0.0 || !c.is_finite() || !r.is_finite() {
            return None;
        }
        let (c, r) = (c as usize, r as usize);
        (c < self.cols && r < self.rows).then_some((c, r))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Occupied).count()
    }

    /// Plain PGM (P2): one text row per grid row, 0 occupied, 255 free.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.cols, self.rows);
        for row in self.cells.chunks(self.cols.max(1)) {
            let line: Vec<&str> = row.iter().map(|c| if *c == Cell::Occupied { "0" } else { "255" }).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

/// Rasterizes `g`: a cell is occupied iff its centre lies outside the floor
/// polygon or inside some object's world-AABB footprint.
pub fn occupancy_grid(g: &SceneGraph, cell_size: f64) -> Result<OccupancyGrid, GeometryError> {
    require_positive("cell_size", cell_size)?;
    let (min, max) = g.room.bounds();
    let cols = (((max.x - min.x) / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let rows = (((max.z - min.z) / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let mut grid = OccupancyGrid::new(min, cell_size, cols, rows);
    let boxes: Vec<_> = g.objects.iter().map(world_aabb).collect();
    for row in 0..rows {
        for col in 0..cols {
            let p = grid.cell_center(col, row);
            if !g.room.contains(p) || boxes.iter().any(|b| b.footprint_contains(p)) {
                grid.set(col, row, Cell::Occupied);
            }
        }
    }
    Ok(grid)
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

/// Exact squared Euclidean distance (cell units, centre to centre) from every
/// cell to the nearest cell flagged in `occupied`.
pub(crate) fn squared_distance_transform(occupied: &[bool], cols: usize, rows: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = occupied.iter().map(|&o| if o { 0.0 } else { FAR }).collect();
    let n = cols.max(rows);
    let (mut f, mut d) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for c in 0..cols {
        for r in 0..rows {
            f[r] = grid[r * cols + c];
        }
        edt_1d(&f[..rows], &mut d[..rows], &mut v, &mut z);
        for r in 0..rows {
            grid[r * cols + c] = d[r];
        }
    }
    for r in 0..rows {
        f[..cols].copy_from_slice(&grid[r * cols..(r + 1) * cols]);
        edt_1d(&f[..cols], &mut d[..cols], &mut v, &mut z);
        grid[r * cols..(r + 1) * cols].copy_from_slice(&d[..cols]);
    }
    grid
}

/// Distance (m) from each cell centre to the nearest occupied cell centre;
/// infinite when the grid has no occupied cell.
pub fn clearance_map(grid: &OccupancyGrid) -> Vec<f64> {
    let occ: Vec<bool> = grid.cells.iter().map(|c| *c == Cell::Occupied).collect();
    squared_distance_transform(&occ, grid.cols, grid.rows)
        .into_iter()
        .map(|d2| if d2 >= FAR / 2.0 { f64::INFINITY } else { d2.sqrt() * grid.cell_size })
        .collect()
}

/// Cells a disc of `clearance_radius` may be centred on: free cells farther
/// than the radius from every occupied cell centre.
pub fn usable_cells(grid: &OccupancyGrid, clearance_radius: f64) -> Vec<bool> {
    let occ: Vec<bool> = grid.cells.iter().map(|c| *c == Cell::Occupied).collect();
    usable_from_mask(&occ, grid.cols, grid.rows, clearance_radius / grid.cell_size)
}

fn walled_mask(grid: &OccupancyGrid) -> (Vec<bool>, usize, usize) {
    let (pc, pr) = (grid.cols + 2, grid.rows + 2);
    let mut occ = vec![true; pc * pr];
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            occ[(r + 1) * pc + c + 1] = grid.get(c, r) == Cell::Occupied;
        }
    }
    (occ, pc, pr)
}

fn crop<T: Copy>(padded: &[T], grid: &OccupancyGrid) -> Vec<T> {
    let pc = grid.cols + 2;
    let mut out = Vec::with_capacity(grid.cells.len());
    for r in 0..grid.rows {
        out.extend_from_slice(&padded[(r + 1) * pc + 1..(r + 1) * pc + 1 + grid.cols]);
    }
    out
}

/// [`usable_cells`] with the grid surrounded by a ring of occupied cells, so that
/// walls on the room's bounding rectangle inflate like any other wall.
pub(crate) fn usable_cells_walled(grid: &OccupancyGrid, clearance_radius: f64) -> Vec<bool> {
    let (occ, pc, pr) = walled_mask(grid);
    crop(&usable_from_mask(&occ, pc, pr, clearance_radius / grid.cell_size), grid)
}

/// [`clearance_map`] with the same surrounding ring as [`usable_cells_walled`].
pub(crate) fn clearance_map_walled(grid: &OccupancyGrid) -> Vec<f64> {
    let (occ, pc, pr) = walled_mask(grid);
    let d2 = squared_distance_transform(&occ, pc, pr);
    crop(&d2, grid).into_iter().map(|d| d.sqrt() * grid.cell_size).collect()
}

pub(crate) fn usable_from_mask(occ: &[bool], cols: usize, rows: usize, radius_cells: f64) -> Vec<bool> {
    let limit = radius_cells.max(0.0).powi(2) + INFLATION_SLACK;
    squared_distance_transform(occ, cols, rows).into_iter().zip(occ).map(|(d2, &o)| !o && d2 > limit).collect()
}

/// 4-connected flood fill over `usable` from every seed.
pub(crate) fn flood(usable: &[bool], cols: usize, rows: usize, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut seen = vec![false; usable.len()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if usable[s] && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (c, r) = (i % cols, i / cols);
        let mut visit = |j: usize| {
            if usable[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < cols {
            visit(i + 1);
        }
        if r > 0 {
            visit(i - cols);
        }
        if r + 1 < rows {
            visit(i + cols);
        }
    }
    seen
}

/// Whether a 4-connected path of usable cells joins the cells holding `start`
/// and `goal`. Points outside the grid never connect.
pub fn path_exists(grid: &OccupancyGrid, start: Point2, goal: Point2, clearance_radius: f64) -> bool {
    let (Some(s), Some(t)) = (grid.cell_of(start), grid.cell_of(goal)) else {
        return false;
    };
    let usable = usable_cells(grid, clearance_radius);
    let (s, t) = (grid.index(s.0, s.1), grid.index(t.0, t.1));
    if !usable[s] || !usable[t] {
        return false;
    }
    flood(&usable, grid.cols, grid.rows, [s])[t]
}

#[derive(PartialEq)]
struct Widest(f64, usize);

impl Eq for Widest {}

impl PartialOrd for Widest {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Widest {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Largest bottleneck clearance (m) over 4-connected paths from `start` to any
/// cell flagged in `targets`, where a path's bottleneck is the smallest
/// `clearance` along it. `None` if no target is reachable through free cells.
pub(crate) fn widest_path(grid: &OccupancyGrid, clearance: &[f64], start: usize, targets: &[bool]) -> Option<f64> {
    let (cols, rows) = (grid.cols, grid.rows);
    let mut best = vec![f64::NEG_INFINITY; clearance.len()];
    let mut heap = BinaryHeap::new();
    if clearance[start] <= 0.0 {
        return None;
    }
    best[start] = clearance[start];
    heap.push(Widest(clearance[start], start));
    while let Some(Widest(w, i)) = heap.pop() {
        if w < best[i] {
            continue;
        }
        if targets[i] {
            return Some(w);
        }
        let (c, r) = (i % cols, i / cols);
        let mut nbrs = [usize::MAX; 4];
        if c > 0 {
            nbrs[0] = i - 1;
        }
        if c + 1 < cols {
            nbrs[1] = i + 1;
        }
        if r > 0 {
            nbrs[2] = i - cols;
        }
        if r + 1 < rows {
            nbrs[3] = i + cols;
        }
        for j in nbrs.into_iter().filter(|&j| j != usize::MAX) {
            let nw = w.min(clearance[j]);
            if clearance[j] > 0.0 && nw > best[j] {
                best[j] = nw;
                heap.push(Widest(nw, j));
            }
        }
    }
    None
}
