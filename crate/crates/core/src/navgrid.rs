//! Global guidance on the radius-inflated grid: a cost-to-go field to the
//! goal, local-goal extraction by lookahead, and shortest path lengths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{AdpError, Result};
use crate::world::{OccupancyWorld, Point2};

const SQRT2: f64 = std::f64::consts::SQRT_2;

const NEIGHBOURS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact shortest-path distances (in metres) from every inflated-free cell to
/// the goal cell, 8-connected with diagonal cost √2 and no corner cutting.
#[derive(Clone, Debug)]
pub struct CostToGo {
    width: usize,
    height: usize,
    resolution: f64,
    free: Vec<bool>,
    dist: Vec<f64>,
    goal: Point2,
}

impl CostToGo {
    pub fn new(world: &OccupancyWorld, radius: f64) -> Self {
        Self::towards(world, radius, world.goal())
    }

    pub fn towards(world: &OccupancyWorld, radius: f64, goal: Point2) -> Self {
        let (w, h) = (world.width(), world.height());
        let mut free = world.inflated_free(radius);
        let mut dist = vec![f64::INFINITY; w * h];
        if let Some((gc, gr)) = world.cell_of(goal.x, goal.y) {
            let g = gr * w + gc;
            free[g] = true;
            dist[g] = 0.0;
            let mut heap = BinaryHeap::from([Entry { cost: 0.0, idx: g }]);
            while let Some(Entry { cost, idx }) = heap.pop() {
                if cost > dist[idx] {
                    continue;
                }
                let (c, r) = ((idx % w) as i64, (idx / w) as i64);
                for (dc, dr) in NEIGHBOURS {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if !free[n] {
                        continue;
                    }
                    if dc != 0
                        && dr != 0
                        && (!free[r as usize * w + nc as usize] || !free[nr as usize * w + c as usize])
                    {
                        continue;
                    }
                    let step = if dc != 0 && dr != 0 { SQRT2 } else { 1.0 };
                    let nd = cost + step;
                    if nd < dist[n] {
                        dist[n] = nd;
                        heap.push(Entry { cost: nd, idx: n });
                    }
                }
            }
        }
        for d in &mut dist {
            *d *= world.resolution();
        }
        Self {
            width: w,
            height: h,
            resolution: world.resolution(),
            free,
            dist,
            goal,
        }
    }

    pub fn distance_at(&self, col: usize, row: usize) -> f64 {
        self.dist[row * self.width + col]
    }

    fn center(&self, idx: usize) -> Point2 {
        Point2::new(
            ((idx % self.width) as f64 + 0.5) * self.resolution,
            ((idx / self.width) as f64 + 0.5) * self.resolution,
        )
    }

    fn cell(&self, p: Point2) -> Option<usize> {
        let c = (p.x / self.resolution).floor();
        let r = (p.y / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some(r as usize * self.width + c as usize)
    }

    /// Reachable cell nearest to `p`: its own cell if reachable, otherwise the
    /// closest reachable cell within a few cells.
    fn anchor(&self, p: Point2) -> Option<usize> {
        let own = self.cell(p);
        if let Some(i) = own {
            if self.dist[i].is_finite() {
                return Some(i);
            }
        }
        let reach = 4i64;
        let c0 = (p.x / self.resolution).floor() as i64;
        let r0 = (p.y / self.resolution).floor() as i64;
        let mut best: Option<(f64, usize)> = None;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (c, r) = (c0 + dc, r0 + dr);
                if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
                    continue;
                }
                let i = r as usize * self.width + c as usize;
                if !self.dist[i].is_finite() {
                    continue;
                }
                let d = self.center(i).dist(p);
                if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                    best = Some((d, i));
                }
            }
        }
        best.map(|b| b.1)
    }

    /// Shortest-path cell sequence from the anchor of `from` to the goal cell.
    pub fn path_from(&self, from: Point2) -> Option<Vec<usize>> {
        let mut cur = self.anchor(from)?;
        let mut path = vec![cur];
        while self.dist[cur] > 0.0 {
            let (c, r) = ((cur % self.width) as i64, (cur / self.width) as i64);
            let mut next: Option<(f64, usize)> = None;
            for (dc, dr) in NEIGHBOURS {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= self.width as i64 || nr >= self.height as i64 {
                    continue;
                }
                let n = nr as usize * self.width + nc as usize;
                if dc != 0
                    && dr != 0
                    && (!self.free[r as usize * self.width + nc as usize]
                        || !self.free[nr as usize * self.width + c as usize])
                {
                    continue;
                }
                if self.dist[n] < self.dist[cur] && next.is_none_or(|(d, _)| self.dist[n] < d) {
                    next = Some((self.dist[n], n));
                }
            }
            cur = next?.1;
            path.push(cur);
        }
        Some(path)
    }

    /// Furthest point within `lookahead` metres along the shortest path from
    /// `from` that is in straight-line sight of `from` on the inflated grid;
    /// the goal itself once it is within reach and in sight.
    pub fn local_goal(&self, from: Point2, lookahead: f64) -> Point2 {
        if from.dist(self.goal) <= lookahead && self.visible(from, self.goal) {
            return self.goal;
        }
        let Some(path) = self.path_from(from) else {
            return self.goal;
        };
        let mut travelled = 0.0;
        let mut prev = from;
        let mut chosen = None;
        for (k, &idx) in path.iter().enumerate() {
            let p = self.center(idx);
            travelled += prev.dist(p);
            if travelled > lookahead {
                break;
            }
            if k == 0 || self.visible(from, p) {
                chosen = Some(p);
            }
            prev = p;
        }
        if chosen.is_some() && path.last().copied() == chosen.and_then(|c| self.cell(c)) {
            return self.goal;
        }
        chosen.unwrap_or_else(|| self.center(path[path.len().min(2) - 1]))
    }

    /// Whether the segment `a → b` stays on inflated-free cells. Blocked cells
    /// at the start of the segment are tolerated until it first reaches free
    /// space, so a robot hugging a wall can still see away from it.
    pub fn visible(&self, a: Point2, b: Point2) -> bool {
        let len = a.dist(b);
        let n = (len / (0.25 * self.resolution)).ceil().max(1.0) as usize;
        let mut left_start = false;
        for k in 0..=n {
            let f = k as f64 / n as f64;
            let p = Point2::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f);
            match self.cell(p) {
                Some(i) if self.free[i] => left_start = true,
                _ if !left_start => {}
                _ => return false,
            }
        }
        true
    }

    /// Distance from `from` along `dir` (unit) over inflated-free cells, up to `max`.
    pub fn free_run(&self, from: Point2, dir: (f64, f64), max: f64) -> f64 {
        let step = 0.25 * self.resolution;
        let mut d = 0.0;
        while d + step <= max {
            let p = Point2::new(from.x + dir.0 * (d + step), from.y + dir.1 * (d + step));
            match self.cell(p) {
                Some(i) if self.free[i] => d += step,
                _ => break,
            }
        }
        d
    }

    pub fn path_length_from(&self, from: Point2) -> Option<f64> {
        let i = self.cell(from)?;
        self.dist[i].is_finite().then_some(self.dist[i])
    }
}

/// Length of the shortest inflated-grid path from the world's start to its goal.
pub fn shortest_path_length(world: &OccupancyWorld, radius: f64) -> Result<f64> {
    let field = CostToGo::new(world, radius);
    let start = world.start().position();
    let i = field.cell(start).ok_or(AdpError::ConnectivityFailure {
        seed: world.seed(),
        attempts: 0,
    })?;
    let d = field.dist[i];
    if d.is_finite() {
        Ok(d)
    } else {
        Err(AdpError::ConnectivityFailure {
            seed: world.seed(),
            attempts: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Pose;

    fn corridor() -> OccupancyWorld {
        OccupancyWorld::empty(100, 100, 0.1, Pose::new(2.05, 5.05, 0.0), Point2::new(8.05, 5.05)).unwrap()
    }

    #[test]
    fn straight_path_length() {
        let d = shortest_path_length(&corridor(), 0.3).unwrap();
        assert!((d - 6.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn local_goal_is_ahead_on_the_path() {
        let f = CostToGo::new(&corridor(), 0.3);
        let lg = f.local_goal(Point2::new(2.05, 5.05), 2.0);
        assert!((lg.y - 5.05).abs() < 1e-9);
        assert!(lg.x > 3.9 && lg.x <= 4.05 + 1e-9, "{lg:?}");
        let near = f.local_goal(Point2::new(7.0, 5.05), 2.0);
        assert_eq!(near, Point2::new(8.05, 5.05));
    }

    #[test]
    fn local_goal_stays_in_sight_around_corners() {
        // An L-shaped wall: the path bends around its end at (5, 7).
        let mut w = corridor();
        for row in 1..70 {
            w.set_occupied(50, row, true);
        }
        let f = CostToGo::new(&w, 0.3);
        for x in [3.0, 3.5, 4.0, 4.4] {
            let from = Point2::new(x, 5.05);
            let lg = f.local_goal(from, 2.0);
            assert!(f.visible(from, lg), "{from:?} -> {lg:?}");
            assert!(lg.dist(from) > 0.5);
        }
        assert!(!f.visible(Point2::new(4.0, 5.05), Point2::new(6.0, 5.05)));
    }

    #[test]
    fn wall_detour_is_longer_than_straight_line() {
        let mut w = corridor();
        for row in 1..80 {
            w.set_occupied(50, row, true);
        }
        let d = shortest_path_length(&w, 0.3).unwrap();
        assert!(d > 6.0 + 1.0);
        let f = CostToGo::new(&w, 0.3);
        let path = f.path_from(w.start().position()).unwrap();
        for idx in path {
            assert!(f.free[idx]);
        }
    }

    #[test]
    fn blocked_world_has_no_path() {
        let mut w = corridor();
        for row in 0..100 {
            w.set_occupied(50, row, true);
        }
        assert!(matches!(
            shortest_path_length(&w, 0.3),
            Err(AdpError::ConnectivityFailure { .. })
        ));
    }
}
