//! Occupancy-grid worlds.
//!
//! The grid origin is the lower-left corner of cell `(0, 0)`; cell `(col, row)`
//! covers `[col·res, (col+1)·res] × [row·res, (row+1)·res]` in metres. Row 0 is
//! the minimum-y row.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Cellular-automata parameters for [`generate_world`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaParams {
    pub fill_prob: f64,
    pub smoothing_iters: u32,
    pub birth_limit: u8,
    pub death_limit: u8,
    /// Disc radius the start, goal and connecting corridor must clear.
    pub clearance: f64,
}

impl Default for CaParams {
    fn default() -> Self {
        Self {
            fill_prob: 0.45,
            smoothing_iters: 4,
            birth_limit: 5,
            death_limit: 4,
            clearance: 0.3,
        }
    }
}

/// Upper bound on `seed + i` regeneration attempts.
pub const MAX_REGEN_ATTEMPTS: u32 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyWorld {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<bool>,
    start: Pose,
    goal: Point2,
    seed: u64,
}

impl OccupancyWorld {
    /// Builds a world from raw occupancy. `cells` is row-major with row 0 at minimum y.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<bool>,
        start: Pose,
        goal: Point2,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AdpError::InvalidParams("world dimensions must be positive".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(AdpError::InvalidParams(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if cells.len() != width * height {
            return Err(AdpError::ShapeMismatch {
                expected: width * height,
                got: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            cells,
            start,
            goal,
            seed,
        })
    }

    /// Obstacle-free interior surrounded by a one-cell boundary wall.
    pub fn empty(width: usize, height: usize, resolution: f64, start: Pose, goal: Point2) -> Result<Self> {
        let mut cells = vec![false; width * height];
        for row in 0..height {
            for col in 0..width {
                if row == 0 || col == 0 || row + 1 == height || col + 1 == width {
                    cells[row * width + col] = true;
                }
            }
        }
        Self::from_cells(width, height, resolution, cells, start, goal, 0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn goal(&self) -> Point2 {
        self.goal
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn with_endpoints(mut self, start: Pose, goal: Point2) -> Self {
        self.start = start;
        self.goal = goal;
        self
    }

    pub fn set_occupied(&mut self, col: usize, row: usize, occupied: bool) {
        let w = self.width;
        self.cells[row * w + col] = occupied;
    }

    pub fn occupied(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.width + col]
    }

    /// Occupancy for signed indices; outside the grid reads as free.
    pub fn occupied_signed(&self, col: i64, row: i64) -> bool {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return false;
        }
        self.cells[row as usize * self.width + col as usize]
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        let (w, h) = self.extent();
        x >= 0.0 && y >= 0.0 && x < w && y < h
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.in_bounds(x, y) {
            return None;
        }
        let col = ((x / self.resolution).floor() as usize).min(self.width - 1);
        let row = ((y / self.resolution).floor() as usize).min(self.height - 1);
        Some((col, row))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Distance from `(x, y)` to the nearest point of any occupied cell,
    /// searching only cells whose boxes could lie within `cap`. Returns `cap`
    /// when nothing is closer.
    pub fn clearance(&self, x: f64, y: f64, cap: f64) -> f64 {
        let res = self.resolution;
        let c0 = ((x - cap) / res).floor() as i64;
        let c1 = ((x + cap) / res).floor() as i64;
        let r0 = ((y - cap) / res).floor() as i64;
        let r1 = ((y + cap) / res).floor() as i64;
        let c0 = c0.max(0);
        let r0 = r0.max(0);
        let c1 = c1.min(self.width as i64 - 1);
        let r1 = r1.min(self.height as i64 - 1);
        let mut best_sq = cap * cap;
        for row in r0..=r1 {
            let y0 = row as f64 * res;
            let dy = (y0 - y).max(y - (y0 + res)).max(0.0);
            if dy * dy > best_sq {
                continue;
            }
            let base = row as usize * self.width;
            for col in c0..=c1 {
                if !self.cells[base + col as usize] {
                    continue;
                }
                let x0 = col as f64 * res;
                let dx = (x0 - x).max(x - (x0 + res)).max(0.0);
                let d = dx * dx + dy * dy;
                if d < best_sq {
                    best_sq = d;
                }
            }
        }
        best_sq.sqrt().min(cap)
    }

    /// True iff an occupied cell lies within `radius` of `(x, y)`, or the point
    /// is outside the grid.
    pub fn is_collision_at(&self, x: f64, y: f64, radius: f64) -> bool {
        if !self.in_bounds(x, y) {
            return true;
        }
        let res = self.resolution;
        let c0 = (((x - radius) / res).floor() as i64).max(0);
        let c1 = (((x + radius) / res).floor() as i64).min(self.width as i64 - 1);
        let r0 = (((y - radius) / res).floor() as i64).max(0);
        let r1 = (((y + radius) / res).floor() as i64).min(self.height as i64 - 1);
        let r_sq = radius * radius;
        for row in r0..=r1 {
            let y0 = row as f64 * res;
            let dy = (y0 - y).max(y - (y0 + res)).max(0.0);
            let base = row as usize * self.width;
            for col in c0..=c1 {
                if self.cells[base + col as usize] {
                    let x0 = col as f64 * res;
                    let dx = (x0 - x).max(x - (x0 + res)).max(0.0);
                    if dx * dx + dy * dy <= r_sq {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Free cells whose centre a disc of `radius` can occupy.
    pub fn inflated_free(&self, radius: f64) -> Vec<bool> {
        let mut free = vec![false; self.width * self.height];
        for row in 0..self.height {
            for col in 0..self.width {
                let c = self.cell_center(col, row);
                free[row * self.width + col] = !self.occupied(col, row) && !self.is_collision_at(c.x, c.y, radius);
            }
        }
        free
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("ADPWORLD 1\n");
        let _ = writeln!(out, "{} {} {} {}", self.width, self.height, self.resolution, self.seed);
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.start.x, self.start.y, self.start.yaw, self.goal.x, self.goal.y
        );
        for row in 0..self.height {
            for col in 0..self.width {
                out.push(if self.occupied(col, row) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| AdpError::Parse(format!("world file: {m}"));
        if lines.next().map(str::trim) != Some("ADPWORLD 1") {
            return Err(bad("missing `ADPWORLD 1` header"));
        }
        let dims: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing dimensions"))?
            .split_whitespace()
            .collect();
        if dims.len() != 4 {
            return Err(bad("dimension line needs `width height resolution seed`"));
        }
        let width: usize = dims[0].parse().map_err(|_| bad("width"))?;
        let height: usize = dims[1].parse().map_err(|_| bad("height"))?;
        let resolution: f64 = dims[2].parse().map_err(|_| bad("resolution"))?;
        let seed: u64 = dims[3].parse().map_err(|_| bad("seed"))?;
        let ends: Vec<f64> = lines
            .next()
            .ok_or_else(|| bad("missing start/goal"))?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("start/goal value")))
            .collect::<Result<_>>()?;
        if ends.len() != 5 {
            return Err(bad("start/goal line needs 5 values"));
        }
        let mut cells = Vec::with_capacity(width * height);
        for row in 0..height {
            let line = lines.next().ok_or_else(|| bad(&format!("missing grid row {row}")))?;
            let line = line.trim_end();
            if line.chars().count() != width {
                return Err(bad(&format!("grid row {row} has wrong width")));
            }
            for ch in line.chars() {
                match ch {
                    '#' => cells.push(true),
                    '.' => cells.push(false),
                    _ => return Err(bad(&format!("unexpected cell character {ch:?}"))),
                }
            }
        }
        Self::from_cells(
            width,
            height,
            resolution,
            cells,
            Pose::new(ends[0], ends[1], ends[2]),
            Point2::new(ends[3], ends[4]),
            seed,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Exact collision membership for a robot disc.
pub fn is_collision(world: &OccupancyWorld, x: f64, y: f64, robot_radius: f64) -> bool {
    world.is_collision_at(x, y, robot_radius)
}

/// Generates a cave-like world from `seed`, retrying with `seed + i` for
/// `i ≤ MAX_REGEN_ATTEMPTS` until the start and goal are connected.
pub fn generate_world(
    seed: u64,
    width: usize,
    height: usize,
    resolution: f64,
    ca: &CaParams,
) -> Result<OccupancyWorld> {
    if width < 10 || height < 10 {
        return Err(AdpError::InvalidParams(format!(
            "world must be at least 10x10 cells, got {width}x{height}"
        )));
    }
    if !(resolution > 0.0) {
        return Err(AdpError::InvalidParams("resolution must be positive".into()));
    }
    if !(0.0..1.0).contains(&ca.fill_prob) {
        return Err(AdpError::InvalidParams(format!(
            "fill_prob must lie in [0, 1), got {}",
            ca.fill_prob
        )));
    }
    if ca.clearance < 0.0 {
        return Err(AdpError::InvalidParams("clearance must be non-negative".into()));
    }
    for i in 0..=MAX_REGEN_ATTEMPTS {
        let attempt_seed = seed.wrapping_add(i as u64);
        let cells = cellular_automaton(attempt_seed, width, height, ca);
        let draft = OccupancyWorld::from_cells(
            width,
            height,
            resolution,
            cells,
            Pose::default(),
            Point2::default(),
            seed,
        )?;
        if let Some((start, goal)) = place_endpoints(&draft, ca.clearance) {
            return Ok(draft.with_endpoints(start, goal));
        }
    }
    Err(AdpError::ConnectivityFailure {
        seed,
        attempts: MAX_REGEN_ATTEMPTS + 1,
    })
}

fn cellular_automaton(seed: u64, width: usize, height: usize, ca: &CaParams) -> Vec<bool> {
    let mut rng = rng::seeded(seed);
    // Interior only; the boundary ring is added afterwards and does not seed growth.
    let (iw, ih) = (width - 2, height - 2);
    let mut grid: Vec<bool> = (0..iw * ih).map(|_| rng.random::<f64>() < ca.fill_prob).collect();
    let mut next = grid.clone();
    for _ in 0..ca.smoothing_iters {
        for r in 0..ih {
            for c in 0..iw {
                let mut n = 0u8;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        if rr >= 0
                            && cc >= 0
                            && (rr as usize) < ih
                            && (cc as usize) < iw
                            && grid[rr as usize * iw + cc as usize]
                        {
                            n += 1;
                        }
                    }
                }
                let idx = r * iw + c;
                next[idx] = if n >= ca.birth_limit {
                    true
                } else if n < ca.death_limit {
                    false
                } else {
                    grid[idx]
                };
            }
        }
        std::mem::swap(&mut grid, &mut next);
    }
    let mut cells = vec![true; width * height];
    for r in 0..ih {
        for c in 0..iw {
            cells[(r + 1) * width + (c + 1)] = grid[r * iw + c];
        }
    }
    cells
}

/// Start on the lowest row and goal on the highest row of the largest
/// clearance-feasible 4-connected component. Rejects components spanning
/// less than half the grid height.
fn place_endpoints(world: &OccupancyWorld, clearance: f64) -> Option<(Pose, Point2)> {
    let (w, h) = (world.width, world.height);
    let free = world.inflated_free(clearance);
    let mut label = vec![usize::MAX; w * h];
    let mut best: Option<Vec<usize>> = None;
    let mut queue = VecDeque::new();
    for seed_idx in 0..w * h {
        if !free[seed_idx] || label[seed_idx] != usize::MAX {
            continue;
        }
        let mut members = Vec::new();
        label[seed_idx] = seed_idx;
        queue.push_back(seed_idx);
        while let Some(idx) = queue.pop_front() {
            members.push(idx);
            let (col, row) = (idx % w, idx / w);
            let mut visit = |n: usize| {
                if free[n] && label[n] == usize::MAX {
                    label[n] = seed_idx;
                    queue.push_back(n);
                }
            };
            if col > 0 {
                visit(idx - 1);
            }
            if col + 1 < w {
                visit(idx + 1);
            }
            if row > 0 {
                visit(idx - w);
            }
            if row + 1 < h {
                visit(idx + w);
            }
        }
        if best.as_ref().is_none_or(|b| members.len() > b.len()) {
            best = Some(members);
        }
    }
    let members = best?;
    let mid = (w as f64 - 1.0) / 2.0;
    let key = |idx: &usize| ((idx % w) as f64 - mid).abs();
    let min_row = members.iter().map(|i| i / w).min()?;
    let max_row = members.iter().map(|i| i / w).max()?;
    if (max_row - min_row) * 2 < h {
        return None;
    }
    let pick = |row: usize| {
        members
            .iter()
            .copied()
            .filter(|i| i / w == row)
            .min_by(|a, b| key(a).total_cmp(&key(b)).then(a.cmp(b)))
    };
    let s = pick(min_row)?;
    let g = pick(max_row)?;
    let sp = world.cell_center(s % w, s / w);
    let gp = world.cell_center(g % w, g / w);
    let yaw = (gp.y - sp.y).atan2(gp.x - sp.x);
    Some((Pose::new(sp.x, sp.y, yaw), gp))
}

/// 4-connected reachability between the cells containing two points, over raw free cells.
pub fn four_connected(world: &OccupancyWorld, from: Point2, to: Point2) -> bool {
    let (Some(a), Some(b)) = (world.cell_of(from.x, from.y), world.cell_of(to.x, to.y)) else {
        return false;
    };
    let w = world.width;
    let (a, b) = (a.1 * w + a.0, b.1 * w + b.0);
    if world.cells[a] || world.cells[b] {
        return false;
    }
    let mut seen = vec![false; world.cells.len()];
    let mut queue = VecDeque::from([a]);
    seen[a] = true;
    while let Some(idx) = queue.pop_front() {
        if idx == b {
            return true;
        }
        let (col, row) = (idx % w, idx / w);
        let mut neighbours = [usize::MAX; 4];
        if col > 0 {
            neighbours[0] = idx - 1;
        }
        if col + 1 < w {
            neighbours[1] = idx + 1;
        }
        if row > 0 {
            neighbours[2] = idx - w;
        }
        if row + 1 < world.height {
            neighbours[3] = idx + w;
        }
        for n in neighbours.into_iter().filter(|&n| n != usize::MAX) {
            if !world.cells[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lone_cell_world() -> OccupancyWorld {
        let mut cells = vec![false; 20 * 20];
        cells[10 * 20 + 10] = true;
        OccupancyWorld::from_cells(20, 20, 0.1, cells, Pose::default(), Point2::default(), 0).unwrap()
    }

    fn brute_force_collision(world: &OccupancyWorld, x: f64, y: f64, r: f64) -> bool {
        if !world.in_bounds(x, y) {
            return true;
        }
        let res = world.resolution();
        (0..world.height()).any(|row| {
            (0..world.width()).any(|col| {
                if !world.occupied(col, row) {
                    return false;
                }
                let (x0, y0) = (col as f64 * res, row as f64 * res);
                let nx = x.clamp(x0, x0 + res);
                let ny = y.clamp(y0, y0 + res);
                (nx - x).hypot(ny - y) <= r
            })
        })
    }

    #[test]
    fn same_seed_same_world() {
        let a = generate_world(7, 30, 30, 0.15, &CaParams::default()).unwrap();
        let b = generate_world(7, 30, 30, 0.15, &CaParams::default()).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn zero_fill_leaves_interior_free() {
        let ca = CaParams {
            fill_prob: 0.0,
            ..CaParams::default()
        };
        let w = generate_world(3, 20, 20, 0.15, &ca).unwrap();
        for row in 1..19 {
            for col in 1..19 {
                assert!(!w.occupied(col, row));
            }
        }
        assert!(four_connected(&w, w.start().position(), w.goal()));
    }

    #[test]
    fn boundary_always_occupied() {
        for seed in 0..10 {
            let w = generate_world(seed, 30, 30, 0.15, &CaParams::default()).unwrap();
            for i in 0..30 {
                assert!(w.occupied(i, 0) && w.occupied(i, 29) && w.occupied(0, i) && w.occupied(29, i));
            }
        }
    }

    #[test]
    fn generated_worlds_connect_start_to_goal() {
        for seed in 0..20 {
            let w = generate_world(seed, 30, 30, 0.15, &CaParams::default()).unwrap();
            assert!(four_connected(&w, w.start().position(), w.goal()), "seed {seed}");
            assert!(!w.is_collision_at(w.start().x, w.start().y, 0.3));
            assert!(!w.is_collision_at(w.goal().x, w.goal().y, 0.3));
            assert!(w.start().y < w.goal().y);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_world(0, 9, 30, 0.15, &CaParams::default()).is_err());
        let ca = CaParams {
            fill_prob: 1.5,
            ..CaParams::default()
        };
        assert!(generate_world(0, 30, 30, 0.15, &ca).is_err());
    }

    #[test]
    fn impossible_density_reports_connectivity_failure() {
        let ca = CaParams {
            fill_prob: 0.95,
            smoothing_iters: 0,
            ..CaParams::default()
        };
        assert!(matches!(
            generate_world(1, 12, 12, 0.15, &ca),
            Err(AdpError::ConnectivityFailure { .. })
        ));
    }

    #[test]
    fn collision_containment_and_empty() {
        let w = lone_cell_world();
        assert!(w.is_collision_at(1.05, 1.05, 0.0));
        let free =
            OccupancyWorld::from_cells(20, 20, 0.1, vec![false; 400], Pose::default(), Point2::default(), 0).unwrap();
        assert!(!free.is_collision_at(1.0, 1.0, 0.3));
        // 0.29 m from the cell's left edge at x = 1.0.
        assert!(w.is_collision_at(1.0 - 0.29, 1.05, 0.3));
        assert!(!w.is_collision_at(1.0 - 0.31, 1.05, 0.3));
        assert!(w.is_collision_at(-0.01, 1.0, 0.0));
    }

    #[test]
    fn collision_matches_exhaustive_scan() {
        let world = generate_world(11, 30, 30, 0.15, &CaParams::default()).unwrap();
        let mut r = rng::seeded(5);
        for _ in 0..2000 {
            let x = r.random_range(-0.2..4.7);
            let y = r.random_range(-0.2..4.7);
            let rad = r.random_range(0.0..0.6);
            assert_eq!(
                world.is_collision_at(x, y, rad),
                brute_force_collision(&world, x, y, rad)
            );
        }
    }

    #[test]
    fn text_round_trip() {
        let w = generate_world(
            2,
            15,
            12,
            0.2,
            &CaParams {
                clearance: 0.1,
                ..CaParams::default()
            },
        )
        .unwrap();
        let back = OccupancyWorld::from_text(&w.to_text()).unwrap();
        assert_eq!(w, back);
        assert!(OccupancyWorld::from_text("ADPWORLD 2\n").is_err());
    }
}
