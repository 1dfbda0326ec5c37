use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{AdpError, Result};
use crate::world::{OccupancyWorld, Point2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub goal: f64,
    pub clearance: f64,
    pub path: f64,
    pub smooth: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            goal: 1.0,
            clearance: 0.2,
            path: 0.2,
            smooth: 0.1,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.goal, self.clearance, self.path, self.smooth];
        if all.iter().any(|w| !(*w >= 0.0)) || all.iter().all(|w| *w == 0.0) {
            return Err(AdpError::Config(format!(
                "cost weights must be non-negative and not all zero: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `max(0, 1 − d/d_safe)²`.
pub fn clearance_penalty(min_obstacle_dist: f64, d_safe: f64) -> f64 {
    let x = (1.0 - min_obstacle_dist / d_safe).max(0.0);
    x * x
}

/// Goal proximity + obstacle clearance + path efficiency + motion smoothness.
/// The first state is the current robot state; clearance is summed over the
/// predicted states after it.
pub fn trajectory_cost(
    traj: &Trajectory,
    world: &OccupancyWorld,
    local_goal: Point2,
    weights: &CostWeights,
    d_safe: f64,
) -> f64 {
    let first = traj.states[0];
    let last = traj.states[traj.states.len() - 1];
    let goal_term = Point2::new(last.x, last.y).dist(local_goal);
    let clearance_term: f64 = traj.states[1..]
        .iter()
        .map(|s| clearance_penalty(world.clearance(s.x, s.y, d_safe), d_safe))
        .sum();
    let length: f64 = traj
        .states
        .windows(2)
        .map(|p| (p[1].x - p[0].x).hypot(p[1].y - p[0].y))
        .sum();
    let straight = (last.x - first.x).hypot(last.y - first.y);
    let path_term = (length - straight).max(0.0);
    let smooth_term = traj
        .controls
        .first()
        .map_or(0.0, |u| (u.v - first.v).abs() + (u.w - first.w).abs());
    weights.goal * goal_term
        + weights.clearance * clearance_term
        + weights.path * path_term
        + weights.smooth * smooth_term
}
