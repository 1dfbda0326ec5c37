use rayon::prelude::*;

use super::{select_and_blend, trajectory_cost, PlanRequest, PlannerConfig, SafetyContext};
use crate::dynamics::{rollout, Control, RobotState, Trajectory, VelocityLimits};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicWindow {
    pub v: (f64, f64),
    pub w: (f64, f64),
}

/// Velocities reachable within one control period, intersected with the limits.
pub fn dynamic_window(state: &RobotState, limits: &VelocityLimits, period: f64) -> DynamicWindow {
    let clip = |lo: f64, hi: f64, min: f64, max: f64| {
        let hi = hi.min(max);
        let lo = lo.max(min).min(hi.max(min));
        (lo, hi.max(lo))
    };
    DynamicWindow {
        v: clip(
            state.v - limits.a_v * period,
            state.v + limits.a_v * period,
            0.0,
            limits.v_max,
        ),
        w: clip(
            state.w - limits.a_w * period,
            state.w + limits.a_w * period,
            -limits.w_max,
            limits.w_max,
        ),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// The `n_v × n_w` velocity grid over the dynamic window, v-major.
pub fn dwa_candidates(window: &DynamicWindow, n_v: usize, n_w: usize) -> Vec<Control> {
    linspace(window.v.0, window.v.1, n_v)
        .flat_map(|v| linspace(window.w.0, window.w.1, n_w).map(move |w| Control::new(v, w)))
        .collect()
}

/// Rolls out and costs every grid candidate, each held constant over the schedule.
pub fn dwa_evaluate(req: &PlanRequest<'_>, config: &PlannerConfig) -> Result<Vec<Trajectory>> {
    let window = dynamic_window(req.state, &config.limits, config.control_period);
    let candidates = dwa_candidates(&window, config.dwa_v_samples, config.dwa_w_samples);
    candidates
        .into_par_iter()
        .map(|u| {
            let mut t = rollout(
                req.state,
                &vec![u; req.schedule.len()],
                req.schedule,
                req.world,
                config.robot_radius,
            )?;
            t.cost = if t.collision {
                f64::INFINITY
            } else {
                trajectory_cost(&t, req.world, req.local_goal, &config.weights, config.d_safe)
            };
            Ok(t)
        })
        .collect()
}

pub fn dwa_plan(req: &PlanRequest<'_>, config: &PlannerConfig) -> Result<Control> {
    let trajectories = dwa_evaluate(req, config)?;
    let safety = SafetyContext {
        state: req.state,
        world: req.world,
        schedule: req.schedule,
        radius: config.robot_radius,
    };
    let u = select_and_blend(&trajectories, config.select_top, config.blend_eps, &safety)?;
    Ok(config.limits.clamp(u))
}
