//! Differential-drive kinematics with exact constant-twist integration.

use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};
use crate::lidar::wrap_angle;
use crate::schedule::FidelitySchedule;
use crate::world::{OccupancyWorld, Pose};

/// Below this angular rate the arc update degenerates to a straight line.
pub const STRAIGHT_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub w: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, yaw: f64, v: f64, w: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
            v,
            w,
        }
    }

    pub fn at_rest(pose: Pose) -> Self {
        Self::new(pose.x, pose.y, pose.yaw, 0.0, 0.0)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.yaw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub w: f64,
}

impl Control {
    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

pub type ControlSequence = Vec<Control>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits {
    pub v_max: f64,
    pub w_max: f64,
    pub a_v: f64,
    pub a_w: f64,
}

impl Default for VelocityLimits {
    fn default() -> Self {
        Self {
            v_max: 1.5,
            w_max: 2.0,
            a_v: 2.0,
            a_w: 4.0,
        }
    }
}

impl VelocityLimits {
    pub fn validate(&self) -> Result<()> {
        if [self.v_max, self.w_max, self.a_v, self.a_w]
            .iter()
            .all(|x| *x > 0.0 && x.is_finite())
        {
            Ok(())
        } else {
            Err(AdpError::InvalidParams(format!(
                "velocity limits must be positive: {self:?}"
            )))
        }
    }

    /// Forward-only command clamp: `v ∈ [0, v_max]`, `|w| ≤ w_max`.
    pub fn clamp(&self, u: Control) -> Control {
        Control::new(u.v.clamp(0.0, self.v_max), u.w.clamp(-self.w_max, self.w_max))
    }
}

/// Advances `state` by `dt` under a constant twist.
pub fn step(state: &RobotState, u: Control, dt: f64) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(AdpError::NonPositiveDt(dt));
    }
    Ok(advance(state, u, dt))
}

fn advance(s: &RobotState, u: Control, dt: f64) -> RobotState {
    let dyaw = u.w * dt;
    let (x, y) = if u.w.abs() < STRAIGHT_EPS {
        (s.x + u.v * dt * s.yaw.cos(), s.y + u.v * dt * s.yaw.sin())
    } else {
        // sin(a+d) - sin(a) = 2 cos(a + d/2) sin(d/2), and likewise for cos;
        // avoids cancellation for small turns.
        let r = u.v / u.w;
        let half = 0.5 * dyaw;
        let chord = 2.0 * half.sin();
        let mid = s.yaw + half;
        (s.x + r * chord * mid.cos(), s.y + r * chord * mid.sin())
    };
    RobotState {
        x,
        y,
        yaw: wrap_angle(s.yaw + dyaw),
        v: u.v,
        w: u.w,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Start state followed by one state per completed interval; ends at the
    /// first colliding state if any.
    pub states: Vec<RobotState>,
    pub controls: ControlSequence,
    pub cost: f64,
    pub collision: bool,
}

/// Number of collision sub-checks in an interval so consecutive checked
/// states are at most one robot radius apart.
pub fn sub_checks(v: f64, dt: f64, radius: f64, resolution: f64) -> usize {
    let spacing = if radius > 0.0 { radius } else { 0.5 * resolution };
    ((v.abs() * dt / spacing).ceil() as usize).max(1)
}

pub fn rollout(
    state: &RobotState,
    controls: &[Control],
    schedule: &FidelitySchedule,
    world: &OccupancyWorld,
    radius: f64,
) -> Result<Trajectory> {
    let intervals = schedule.intervals();
    if controls.len() != intervals.len() {
        return Err(AdpError::ShapeMismatch {
            expected: intervals.len(),
            got: controls.len(),
        });
    }
    let mut states = Vec::with_capacity(intervals.len() + 1);
    states.push(*state);
    let mut cur = *state;
    let mut collision = false;
    'outer: for (&u, &dt) in controls.iter().zip(intervals) {
        if !(dt > 0.0) {
            return Err(AdpError::NonPositiveDt(dt));
        }
        let m = sub_checks(u.v, dt, radius, world.resolution());
        for j in 1..=m {
            let s = if j == m {
                advance(&cur, u, dt)
            } else {
                advance(&cur, u, dt * j as f64 / m as f64)
            };
            if world.is_collision_at(s.x, s.y, radius) {
                states.push(s);
                collision = true;
                break 'outer;
            }
            if j == m {
                cur = s;
            }
        }
        states.push(cur);
    }
    Ok(Trajectory {
        states,
        controls: controls.to_vec(),
        cost: 0.0,
        collision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::schedule::{ddp_schedule, fixed_schedule};
    use crate::world::Point2;
    use rand::Rng;
    use std::f64::consts::PI;

    fn euler(s: &RobotState, u: Control, dt: f64) -> RobotState {
        let h = 1e-5;
        let n = (dt / h).round() as usize;
        let h = dt / n as f64;
        let (mut x, mut y, mut yaw) = (s.x, s.y, s.yaw);
        for _ in 0..n {
            x += u.v * yaw.cos() * h;
            y += u.v * yaw.sin() * h;
            yaw += u.w * h;
        }
        RobotState {
            x,
            y,
            yaw: wrap_angle(yaw),
            v: u.v,
            w: u.w,
        }
    }

    fn open_world() -> OccupancyWorld {
        OccupancyWorld::empty(100, 100, 0.1, Pose::new(2.0, 5.0, 0.0), Point2::new(8.0, 5.0)).unwrap()
    }

    #[test]
    fn straight_line() {
        let s = step(&RobotState::default(), Control::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!((s.x, s.y, s.yaw), (1.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn_matches_fine_integration() {
        let u = Control::new(1.0, PI / 2.0);
        let s = step(&RobotState::default(), u, 1.0).unwrap();
        let o = euler(&RobotState::default(), u, 1.0);
        assert!((s.x - 2.0 / PI).abs() < 1e-12 && (s.y - 2.0 / PI).abs() < 1e-12);
        assert!((s.x - o.x).abs() < 1e-4 && (s.y - o.y).abs() < 1e-4);
        assert!((s.yaw - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_in_place() {
        let s0 = RobotState::new(1.0, 2.0, 0.3, 0.0, 0.0);
        let s = step(&s0, Control::new(0.0, 0.8), 0.5).unwrap();
        assert_eq!((s.x, s.y), (1.0, 2.0));
        assert!((s.yaw - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_dt() {
        assert!(matches!(
            step(&RobotState::default(), Control::default(), 0.0),
            Err(AdpError::NonPositiveDt(_))
        ));
    }

    #[test]
    fn random_steps_match_euler() {
        let mut r = rng::seeded(3);
        for _ in 0..200 {
            let s = RobotState::new(
                r.random_range(-5.0..5.0),
                r.random_range(-5.0..5.0),
                r.random_range(-PI..PI),
                0.0,
                0.0,
            );
            let u = Control::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            let dt = r.random_range(0.001..0.5);
            let a = step(&s, u, dt).unwrap();
            let b = euler(&s, u, dt);
            assert!((a.x - b.x).abs() < 1e-4 && (a.y - b.y).abs() < 1e-4);
            assert!(wrap_angle(a.yaw - b.yaw).abs() < 1e-4);
        }
    }

    #[test]
    fn rollout_displacement_independent_of_partition() {
        let w = open_world();
        let s = RobotState::at_rest(w.start());
        for sched in [
            fixed_schedule(2.0, 20).unwrap(),
            ddp_schedule(2.0, 20, 1.7).unwrap(),
            fixed_schedule(2.0, 1).unwrap(),
        ] {
            let tr = rollout(&s, &vec![Control::new(1.0, 0.0); sched.len()], &sched, &w, 0.3).unwrap();
            assert!(!tr.collision);
            assert!((tr.states.last().unwrap().x - 4.0).abs() < 1e-9);
            assert_eq!(tr.states.len(), sched.len() + 1);
        }
    }

    #[test]
    fn rollout_truncates_at_wall() {
        let mut w = open_world();
        for row in 0..100 {
            w.set_occupied(30, row, true); // face at x = 3.0
        }
        let s = RobotState::at_rest(w.start());
        let sched = fixed_schedule(2.0, 20).unwrap();
        let tr = rollout(&s, &vec![Control::new(1.0, 0.0); 20], &sched, &w, 0.3).unwrap();
        assert!(tr.collision);
        let last = tr.states.last().unwrap();
        assert!(w.is_collision_at(last.x, last.y, 0.3));
        for st in &tr.states[..tr.states.len() - 1] {
            assert!(!w.is_collision_at(st.x, st.y, 0.3));
        }
        // First colliding sub-check lies within one sub-check spacing of x = 2.7.
        assert!(last.x >= 2.7 && last.x <= 2.7 + 0.1 + 1e-9, "{}", last.x);
    }

    #[test]
    fn zero_controls_stay_put() {
        let w = open_world();
        let s = RobotState::at_rest(w.start());
        let sched = ddp_schedule(2.0, 20, 1.7).unwrap();
        let tr = rollout(&s, &vec![Control::default(); 20], &sched, &w, 0.3).unwrap();
        assert!(!tr.collision);
        assert!(tr.states.iter().all(|x| x.x == s.x && x.y == s.y && x.yaw == s.yaw));
    }

    #[test]
    fn rollout_checks_control_count() {
        let w = open_world();
        let sched = fixed_schedule(2.0, 4).unwrap();
        assert!(rollout(&RobotState::default(), &[Control::default()], &sched, &w, 0.3).is_err());
    }
}
