//! Simulated planar LiDAR: 720 beams over a 270° field of view, cast by
//! exact grid traversal.

use std::f64::consts::PI;

use crate::world::{OccupancyWorld, Pose};

pub const BEAM_COUNT: usize = 720;
pub const FOV_DEG: f64 = 270.0;
/// Smallest range reported when the sensor origin is inside an occupied cell.
pub const MIN_RANGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LidarScan {
    pub ranges: Vec<f64>,
    pub max_range: f64,
    pub frame_pose: Pose,
}

/// Bearing of beam `k` relative to the robot heading, in radians.
pub fn beam_bearing(k: usize) -> f64 {
    let fov = FOV_DEG.to_radians();
    -fov / 2.0 + k as f64 * fov / (BEAM_COUNT - 1) as f64
}

impl LidarScan {
    /// Scan reduced to `bins` sectors by taking each sector's minimum.
    pub fn min_pooled(&self, bins: usize) -> Vec<f64> {
        assert!(
            bins > 0 && self.ranges.len().is_multiple_of(bins),
            "bins must divide the beam count"
        );
        self.ranges
            .chunks(self.ranges.len() / bins)
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

pub fn cast_lidar(world: &OccupancyWorld, pose: &Pose, max_range: f64) -> LidarScan {
    let ranges = (0..BEAM_COUNT)
        .map(|k| cast_ray(world, pose.x, pose.y, pose.yaw + beam_bearing(k), max_range))
        .collect();
    LidarScan {
        ranges,
        max_range,
        frame_pose: *pose,
    }
}

/// Distance along `heading` to the first occupied cell boundary, clamped to `max_range`.
pub fn cast_ray(world: &OccupancyWorld, x: f64, y: f64, heading: f64, max_range: f64) -> f64 {
    let res = world.resolution();
    let (dx, dy) = (heading.cos(), heading.sin());
    let mut col = (x / res).floor() as i64;
    let mut row = (y / res).floor() as i64;
    if world.occupied_signed(col, row) {
        return MIN_RANGE;
    }
    let step_c: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dy > 0.0 { 1 } else { -1 };
    let boundary = |cell: i64, step: i64| (cell + if step > 0 { 1 } else { 0 }) as f64 * res;
    let mut t_max_c = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (boundary(col, step_c) - x) / dx
    };
    let mut t_max_r = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (boundary(row, step_r) - y) / dy
    };
    let t_delta_c = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        res / dx.abs()
    };
    let t_delta_r = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        res / dy.abs()
    };
    let (w, h) = (world.width() as i64, world.height() as i64);
    loop {
        let t = if t_max_c < t_max_r {
            col += step_c;
            let t = t_max_c;
            t_max_c += t_delta_c;
            t
        } else {
            row += step_r;
            let t = t_max_r;
            t_max_r += t_delta_r;
            t
        };
        if t >= max_range {
            return max_range;
        }
        if col < 0 || row < 0 || col >= w || row >= h {
            return max_range;
        }
        if world.occupied(col as usize, row as usize) {
            return t.max(MIN_RANGE);
        }
    }
}

/// The `k` smallest ranges, ascending.
pub fn k_nearest_obstacle_distances(scan: &LidarScan, k: usize) -> Vec<f64> {
    k_smallest(&scan.ranges, k)
}

pub fn k_smallest(values: &[f64], k: usize) -> Vec<f64> {
    let k = k.min(values.len());
    if k == 0 {
        return Vec::new();
    }
    let mut v = values.to_vec();
    v.select_nth_unstable_by(k - 1, f64::total_cmp);
    v.truncate(k);
    v.sort_by(f64::total_cmp);
    v
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
