//! Path-integral sampling over per-interval perturbed control sequences.
//!
//! Sample 0 is the unperturbed nominal; samples `1..K` add independent
//! Gaussian noise to each interval's command. The first interval is clamped
//! to the dynamic window, later intervals to the velocity limits.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{dynamic_window, trajectory_cost, PlanRequest, PlannerConfig, SafetyContext};
use crate::dynamics::{rollout, Control, ControlSequence, Trajectory};
use crate::error::{AdpError, Result};
use crate::rng;
use crate::schedule::FidelitySchedule;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingOutcome {
    pub control: Control,
    /// Cost-weighted sequence for the current schedule, not yet time-shifted.
    pub nominal: ControlSequence,
    /// Normalized sample weights in sample order.
    pub weights: Vec<f64>,
}

/// `η_k ∝ exp(−(S_k − S_min)/λ)`, normalized; infinite costs get weight 0.
pub fn mppi_weights(costs: &[f64], lambda: f64) -> Option<Vec<f64>> {
    normalized(costs, |d| (-d / lambda).exp())
}

/// `η_k ∝ (1 + S_k − S_min)^(−1/λ)`, normalized; infinite costs get weight 0.
pub fn log_mppi_weights(costs: &[f64], lambda: f64) -> Option<Vec<f64>> {
    normalized(costs, |d| (1.0 + d).powf(-1.0 / lambda))
}

fn normalized(costs: &[f64], kernel: impl Fn(f64) -> f64) -> Option<Vec<f64>> {
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let raw: Vec<f64> = costs
        .iter()
        .map(|&c| if c.is_finite() { kernel(c - min) } else { 0.0 })
        .collect();
    let z: f64 = raw.iter().sum();
    Some(raw.into_iter().map(|r| r / z).collect())
}

/// Re-expresses a piecewise-constant sequence on `new` intervals, shifted
/// forward in time by `shift`. Each new interval takes the old command active
/// at its midpoint; past the old horizon the last command is held.
pub fn retime_nominal(seq: &[Control], old: &FidelitySchedule, new: &FidelitySchedule, shift: f64) -> ControlSequence {
    let old_ends = old.breakpoints();
    let mut t0 = 0.0;
    new.intervals()
        .iter()
        .map(|dt| {
            let mid = t0 + 0.5 * dt + shift;
            t0 += dt;
            let idx = old_ends.iter().position(|&e| mid < e).unwrap_or(seq.len() - 1);
            seq[idx.min(seq.len() - 1)]
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Weighting {
    Exponential,
    LogTransformed,
}

pub fn mppi_plan(
    req: &PlanRequest<'_>,
    config: &PlannerConfig,
    nominal: &[Control],
    seed: u64,
) -> Result<SamplingOutcome> {
    sampling_plan(req, config, nominal, seed, Weighting::Exponential)
}

pub fn logmppi_plan(
    req: &PlanRequest<'_>,
    config: &PlannerConfig,
    nominal: &[Control],
    seed: u64,
) -> Result<SamplingOutcome> {
    sampling_plan(req, config, nominal, seed, Weighting::LogTransformed)
}

fn sampling_plan(
    req: &PlanRequest<'_>,
    config: &PlannerConfig,
    nominal: &[Control],
    seed: u64,
    weighting: Weighting,
) -> Result<SamplingOutcome> {
    let n = req.schedule.len();
    if nominal.len() != n {
        return Err(AdpError::ShapeMismatch {
            expected: n,
            got: nominal.len(),
        });
    }
    let window = dynamic_window(req.state, &config.limits, config.control_period);
    let clamp = |i: usize, u: Control| {
        let u = config.limits.clamp(u);
        if i == 0 {
            Control::new(u.v.clamp(window.v.0, window.v.1), u.w.clamp(window.w.0, window.w.1))
        } else {
            u
        }
    };
    let noise = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| AdpError::InvalidParams(e.to_string()));
    let (nv, nw) = (noise(config.sigma_v)?, noise(config.sigma_w)?);
    let mut r = rng::seeded(seed);
    let sequences: Vec<ControlSequence> = (0..config.samples)
        .map(|k| {
            nominal
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    if k == 0 {
                        clamp(i, *u)
                    } else {
                        let dv = nv.sample(&mut r);
                        let dw = nw.sample(&mut r);
                        clamp(i, Control::new(u.v + dv, u.w + dw))
                    }
                })
                .collect()
        })
        .collect();

    let trajectories: Vec<Trajectory> = sequences
        .par_iter()
        .map(|seq| {
            let mut t = rollout(req.state, seq, req.schedule, req.world, config.robot_radius)?;
            t.cost = if t.collision {
                f64::INFINITY
            } else {
                trajectory_cost(&t, req.world, req.local_goal, &config.weights, config.d_safe)
            };
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = trajectories.iter().map(|t| t.cost).collect();
    let weights = match weighting {
        Weighting::Exponential => mppi_weights(&costs, config.lambda),
        Weighting::LogTransformed => log_mppi_weights(&costs, config.lambda),
    }
    .ok_or(AdpError::NoFeasibleTrajectory {
        candidates: costs.len(),
    })?;

    // Ordered reduction: sample-index order regardless of how rollouts ran.
    let mut blended = vec![Control::default(); n];
    for (seq, &wk) in sequences.iter().zip(&weights) {
        if wk == 0.0 {
            continue;
        }
        for (b, u) in blended.iter_mut().zip(seq) {
            b.v += wk * u.v;
            b.w += wk * u.w;
        }
    }
    let blended: ControlSequence = blended.into_iter().enumerate().map(|(i, u)| clamp(i, u)).collect();

    let safety = SafetyContext {
        state: req.state,
        world: req.world,
        schedule: req.schedule,
        radius: config.robot_radius,
    };
    let blended_free =
        rollout(req.state, &blended, req.schedule, req.world, config.robot_radius).is_ok_and(|t| !t.collision);
    let nominal = if blended_free {
        blended
    } else {
        let best = costs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .map(|(k, _)| k)
            .expect("weights exist so some sample survived");
        sequences[best].clone()
    };
    debug_assert!(
        rollout(safety.state, &nominal, safety.schedule, safety.world, safety.radius).is_ok_and(|t| !t.collision)
    );
    Ok(SamplingOutcome {
        control: nominal[0],
        nominal,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RobotState;
    use crate::planner::PlannerVariant;
    use crate::schedule::{ddp_schedule, fixed_schedule};
    use crate::world::{OccupancyWorld, Point2, Pose};

    fn open() -> OccupancyWorld {
        OccupancyWorld::empty(100, 100, 0.1, Pose::new(2.0, 5.0, 0.0), Point2::new(8.0, 5.0)).unwrap()
    }

    #[test]
    fn equal_costs_split_evenly() {
        let w = mppi_weights(&[2.0, 2.0, f64::INFINITY], 0.3).unwrap();
        assert_eq!(w, vec![0.5, 0.5, 0.0]);
        let lw = log_mppi_weights(&[4.0, 4.0], 0.3).unwrap();
        assert_eq!(lw, vec![0.5, 0.5]);
    }

    #[test]
    fn log_weights_hand_values() {
        let w = log_mppi_weights(&[3.0, 4.0], 1.0).unwrap();
        // Unnormalized {1, 0.5}.
        assert!((w[0] / w[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weights_normalize() {
        let costs = [0.3, 1.7, 5.0, 0.01, f64::INFINITY, 2.2];
        for w in [
            mppi_weights(&costs, 0.3).unwrap(),
            log_mppi_weights(&costs, 0.3).unwrap(),
        ] {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(mppi_weights(&[f64::INFINITY; 3], 0.3).is_none());
    }

    #[test]
    fn zero_noise_passes_nominal_through() {
        let w = open();
        let s = RobotState::new(2.0, 5.0, 0.0, 0.5, 0.0);
        let sched = ddp_schedule(2.0, 20, 1.7).unwrap();
        let cfg = PlannerConfig {
            sigma_v: 0.0,
            sigma_w: 0.0,
            ..PlannerConfig::with_variant(PlannerVariant::Mppi)
        };
        let nominal = vec![Control::new(0.6, 0.1); 20];
        let req = PlanRequest {
            state: &s,
            world: &w,
            local_goal: w.goal(),
            schedule: &sched,
        };
        for out in [
            mppi_plan(&req, &cfg, &nominal, 1).unwrap(),
            logmppi_plan(&req, &cfg, &nominal, 1).unwrap(),
        ] {
            assert!((out.control.v - 0.6).abs() < 1e-12 && (out.control.w - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn small_temperature_selects_argmin_sample() {
        let w = open();
        let s = RobotState::new(2.0, 5.0, 0.0, 0.5, 0.0);
        let sched = ddp_schedule(2.0, 20, 1.7).unwrap();
        let cfg = PlannerConfig {
            lambda: 1e-6,
            samples: 64,
            ..PlannerConfig::with_variant(PlannerVariant::Mppi)
        };
        let nominal = vec![Control::new(0.5, 0.0); 20];
        let req = PlanRequest {
            state: &s,
            world: &w,
            local_goal: Point2::new(5.0, 6.0),
            schedule: &sched,
        };
        let out = mppi_plan(&req, &cfg, &nominal, 42).unwrap();
        let best = out
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(*best.1 > 1.0 - 1e-9);
        // Regenerating the same seed reproduces the winner's first command.
        let again = mppi_plan(&req, &cfg, &nominal, 42).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn retime_shifts_and_resamples() {
        let old = fixed_schedule(1.0, 4).unwrap();
        let seq: Vec<Control> = (0..4).map(|i| Control::new(i as f64, 0.0)).collect();
        let same = retime_nominal(&seq, &old, &old, 0.0);
        assert_eq!(same, seq);
        let shifted = retime_nominal(&seq, &old, &old, 0.25);
        assert_eq!(
            shifted.iter().map(|u| u.v).collect::<Vec<_>>(),
            vec![1.0, 2.0, 3.0, 3.0]
        );
        let finer = retime_nominal(&seq, &old, &fixed_schedule(1.0, 8).unwrap(), 0.0);
        assert_eq!(finer.len(), 8);
        assert_eq!(finer[1].v, 0.0);
        assert_eq!(finer[2].v, 1.0);
    }

    #[test]
    fn wrong_nominal_length_is_rejected() {
        let w = open();
        let s = RobotState::at_rest(w.start());
        let sched = ddp_schedule(2.0, 20, 1.7).unwrap();
        let req = PlanRequest {
            state: &s,
            world: &w,
            local_goal: w.goal(),
            schedule: &sched,
        };
        let cfg = PlannerConfig::with_variant(PlannerVariant::Mppi);
        assert!(mppi_plan(&req, &cfg, &[Control::default(); 3], 0).is_err());
    }
}
