use crate::dynamics::{rollout, Control, RobotState, Trajectory};
use crate::error::{AdpError, Result};
use crate::schedule::FidelitySchedule;
use crate::world::OccupancyWorld;

/// Collision-free survivors, lowest cost first (ties by input order), at most `k`.
fn survivors(trajectories: &[Trajectory], k: usize) -> Vec<&Trajectory> {
    let mut alive: Vec<(usize, &Trajectory)> = trajectories
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.collision && t.cost.is_finite())
        .collect();
    alive.sort_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)));
    alive.into_iter().take(k).map(|(_, t)| t).collect()
}

/// Inverse-cost weighted mean of the first controls of the `k` cheapest
/// collision-free trajectories.
pub fn blend_controls(trajectories: &[Trajectory], k: usize, eps: f64) -> Result<Control> {
    let top = survivors(trajectories, k);
    if top.is_empty() {
        return Err(AdpError::NoFeasibleTrajectory {
            candidates: trajectories.len(),
        });
    }
    let (mut v, mut w, mut z) = (0.0, 0.0, 0.0);
    for t in &top {
        let weight = 1.0 / (t.cost + eps);
        let u = t.controls[0];
        v += weight * u.v;
        w += weight * u.w;
        z += weight;
    }
    Ok(Control::new(v / z, w / z))
}

/// What the safety filter needs to roll a command out.
#[derive(Clone, Copy, Debug)]
pub struct SafetyContext<'a> {
    pub state: &'a RobotState,
    pub world: &'a OccupancyWorld,
    pub schedule: &'a FidelitySchedule,
    pub radius: f64,
}

impl SafetyContext<'_> {
    pub fn constant_rollout_is_free(&self, u: Control) -> bool {
        let seq = vec![u; self.schedule.len()];
        rollout(self.state, &seq, self.schedule, self.world, self.radius).is_ok_and(|t| !t.collision)
    }
}

/// Blends the `k` cheapest collision-free trajectories, then verifies the
/// blended command held constant over the schedule. When that rollout
/// collides, falls back to survivors' first controls in cost order.
pub fn select_and_blend(
    trajectories: &[Trajectory],
    k: usize,
    eps: f64,
    safety: &SafetyContext<'_>,
) -> Result<Control> {
    let blended = blend_controls(trajectories, k, eps)?;
    if safety.constant_rollout_is_free(blended) {
        return Ok(blended);
    }
    survivors(trajectories, trajectories.len())
        .into_iter()
        .map(|t| t.controls[0])
        .find(|&u| safety.constant_rollout_is_free(u))
        .ok_or(AdpError::NoFeasibleTrajectory {
            candidates: trajectories.len(),
        })
}
