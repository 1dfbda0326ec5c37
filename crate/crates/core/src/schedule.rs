//! Fidelity schedules: the ordered integration intervals a rollout uses.
//!
//! Breakpoints follow `t_i = α·(i/N)·T + (1−α)·(i/N)^p·T`, intervals are
//! `Δt_i = t_i − t_{i−1}`. With `p > 1` and `α < 1` intervals grow along the
//! horizon (fine near the robot, coarse far away); reversing them gives the
//! incremental variant.

use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    Fixed,
    Decremental,
    BlendedAdp,
    Incremental,
    Unconstrained,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelitySchedule {
    intervals: Vec<f64>,
    total: f64,
    kind: ScheduleKind,
}

impl FidelitySchedule {
    pub fn new(intervals: Vec<f64>, kind: ScheduleKind) -> Result<Self> {
        if intervals.is_empty() {
            return Err(AdpError::InvalidParams("schedule needs at least one interval".into()));
        }
        if let Some(bad) = intervals.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(AdpError::InvalidParams(format!("non-positive interval {bad}")));
        }
        let total = intervals.iter().sum();
        Ok(Self { intervals, total, kind })
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Interval end times `t_1 … t_N`.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .scan(0.0, |t, dt| {
                *t += dt;
                Some(*t)
            })
            .collect()
    }

    pub fn reversed(&self) -> Self {
        let mut intervals = self.intervals.clone();
        intervals.reverse();
        Self {
            intervals,
            total: self.total,
            kind: ScheduleKind::Incremental,
        }
    }
}

/// The four-parameter schedule family an adaptive policy selects from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub horizon: f64,
    pub steps: usize,
    pub power: f64,
    pub alpha: f64,
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(AdpError::InvalidParams(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.steps == 0 {
            return Err(AdpError::InvalidParams("steps must be at least 1".into()));
        }
        if !(self.power >= 1.0 && self.power.is_finite()) {
            return Err(AdpError::InvalidParams(format!(
                "power must be >= 1, got {}",
                self.power
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(AdpError::InvalidParams(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

fn from_breakpoints(n: usize, kind: ScheduleKind, t: impl Fn(f64) -> f64) -> Result<FidelitySchedule> {
    let mut prev = 0.0;
    let mut intervals = Vec::with_capacity(n);
    for i in 1..=n {
        let ti = t(i as f64 / n as f64);
        intervals.push(ti - prev);
        prev = ti;
    }
    FidelitySchedule::new(intervals, kind)
}

/// `N` equal intervals over `T`.
pub fn fixed_schedule(horizon: f64, steps: usize) -> Result<FidelitySchedule> {
    ScheduleParams {
        horizon,
        steps,
        power: 1.0,
        alpha: 1.0,
    }
    .validate()?;
    from_breakpoints(steps, ScheduleKind::Fixed, |f| f * horizon)
}

/// Decremental-dynamics baseline: `Δt_i = (i/N)^p·T − ((i−1)/N)^p·T`.
pub fn ddp_schedule(horizon: f64, steps: usize, power: f64) -> Result<FidelitySchedule> {
    ScheduleParams {
        horizon,
        steps,
        power,
        alpha: 0.0,
    }
    .validate()?;
    from_breakpoints(steps, ScheduleKind::Decremental, |f| f.powf(power) * horizon)
}

pub fn blended_schedule(params: &ScheduleParams) -> Result<FidelitySchedule> {
    params.validate()?;
    let ScheduleParams {
        horizon,
        steps,
        power,
        alpha,
    } = *params;
    from_breakpoints(steps, ScheduleKind::BlendedAdp, |f| {
        alpha * f * horizon + (1.0 - alpha) * f.powf(power) * horizon
    })
}

pub fn incremental_schedule(params: &ScheduleParams) -> Result<FidelitySchedule> {
    Ok(blended_schedule(params)?.reversed())
}

/// Softmax over raw per-interval scores, scaled to the horizon.
pub fn unconstrained_schedule(raw: &[f64], horizon: f64) -> Result<FidelitySchedule> {
    if raw.is_empty() {
        return Err(AdpError::InvalidParams(
            "unconstrained schedule needs at least one score".into(),
        ));
    }
    if !(horizon > 0.0) {
        return Err(AdpError::InvalidParams(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|r| (r - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    FidelitySchedule::new(
        exps.iter().map(|e| e / z * horizon).collect(),
        ScheduleKind::Unconstrained,
    )
}

/// Feasible parameter box for decoding normalized actions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionBounds {
    pub horizon: (f64, f64),
    pub steps: (usize, usize),
    pub power: (f64, f64),
    pub alpha: (f64, f64),
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            horizon: (1.0, 3.0),
            steps: (5, 30),
            power: (1.0, 3.0),
            alpha: (0.0, 1.0),
        }
    }
}

fn affine(raw: f64, lo: f64, hi: f64) -> f64 {
    let r = if raw.is_nan() { 0.0 } else { raw.clamp(-1.0, 1.0) };
    lo + (r + 1.0) * 0.5 * (hi - lo)
}

fn inverse_affine(value: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        0.0
    } else {
        ((value - lo) / (hi - lo) * 2.0 - 1.0).clamp(-1.0, 1.0)
    }
}

impl ActionBounds {
    /// Maps `[horizon, steps, power, alpha]` in `[−1, 1]` onto the box. Steps
    /// round half-up.
    pub fn decode(&self, raw: &[f64; 4]) -> ScheduleParams {
        let steps = affine(raw[1], self.steps.0 as f64, self.steps.1 as f64);
        ScheduleParams {
            horizon: affine(raw[0], self.horizon.0, self.horizon.1),
            steps: ((steps + 0.5).floor() as usize).max(1),
            power: affine(raw[2], self.power.0, self.power.1),
            alpha: affine(raw[3], self.alpha.0, self.alpha.1),
        }
    }

    pub fn encode(&self, params: &ScheduleParams) -> [f64; 4] {
        [
            inverse_affine(params.horizon, self.horizon.0, self.horizon.1),
            inverse_affine(params.steps as f64, self.steps.0 as f64, self.steps.1 as f64),
            inverse_affine(params.power, self.power.0, self.power.1),
            inverse_affine(params.alpha, self.alpha.0, self.alpha.1),
        ]
    }
}

pub fn decode_action(raw: &[f64; 4], bounds: &ActionBounds) -> ScheduleParams {
    bounds.decode(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ddp_reference_intervals() {
        let s = ddp_schedule(2.0, 20, 1.7).unwrap();
        assert_eq!(s.len(), 20);
        assert!((s.total() - 2.0).abs() < 1e-9);
        assert!((s.intervals()[0] - 0.012282).abs() < 1e-5);
        assert!((s.intervals()[19] - 0.167012).abs() < 1e-5);
        assert_eq!(s.kind(), ScheduleKind::Decremental);
    }

    #[test]
    fn linear_power_is_uniform() {
        let s = ddp_schedule(2.0, 20, 1.0).unwrap();
        assert!(s.intervals().iter().all(|d| (d - 0.1).abs() < 1e-12));
        let one = ddp_schedule(1.3, 1, 2.0).unwrap();
        assert_eq!(one.intervals(), &[1.3]);
    }

    #[test]
    fn blended_collapses() {
        let uniform = blended_schedule(&ScheduleParams {
            horizon: 2.0,
            steps: 20,
            power: 2.6,
            alpha: 1.0,
        })
        .unwrap();
        assert_eq!(uniform.intervals(), fixed_schedule(2.0, 20).unwrap().intervals());
        let pure = blended_schedule(&ScheduleParams {
            horizon: 2.0,
            steps: 20,
            power: 1.7,
            alpha: 0.0,
        })
        .unwrap();
        assert_eq!(pure.intervals(), ddp_schedule(2.0, 20, 1.7).unwrap().intervals());
    }

    #[test]
    fn two_step_hand_example() {
        let p = ScheduleParams {
            horizon: 2.0,
            steps: 2,
            power: 2.0,
            alpha: 0.5,
        };
        let b = blended_schedule(&p).unwrap();
        assert!((b.intervals()[0] - 0.75).abs() < 1e-12 && (b.intervals()[1] - 1.25).abs() < 1e-12);
        let inc = incremental_schedule(&p).unwrap();
        assert!((inc.intervals()[0] - 1.25).abs() < 1e-12 && (inc.intervals()[1] - 0.75).abs() < 1e-12);
        assert!((inc.total() - 2.0).abs() < 1e-12);
        assert_eq!(inc.kind(), ScheduleKind::Incremental);
    }

    #[test]
    fn reversal_of_uniform_is_identity() {
        let p = ScheduleParams {
            horizon: 2.0,
            steps: 20,
            power: 1.7,
            alpha: 1.0,
        };
        let inc = incremental_schedule(&p).unwrap();
        assert!(inc.intervals().iter().all(|d| (d - 0.1).abs() < 1e-12));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ddp_schedule(0.0, 20, 1.7).is_err());
        assert!(ddp_schedule(2.0, 0, 1.7).is_err());
        assert!(ddp_schedule(2.0, 20, 0.5).is_err());
        assert!(blended_schedule(&ScheduleParams {
            horizon: 2.0,
            steps: 4,
            power: 2.0,
            alpha: 1.5
        })
        .is_err());
    }

    #[test]
    fn decode_endpoints_and_midpoint() {
        let b = ActionBounds::default();
        let lo = b.decode(&[-1.0; 4]);
        assert_eq!(
            lo,
            ScheduleParams {
                horizon: 1.0,
                steps: 5,
                power: 1.0,
                alpha: 0.0
            }
        );
        let hi = b.decode(&[1.0; 4]);
        assert_eq!(
            hi,
            ScheduleParams {
                horizon: 3.0,
                steps: 30,
                power: 3.0,
                alpha: 1.0
            }
        );
        let mid = b.decode(&[0.0; 4]);
        assert_eq!(
            mid,
            ScheduleParams {
                horizon: 2.0,
                steps: 18,
                power: 2.0,
                alpha: 0.5
            }
        );
        // Saturates outside [-1, 1].
        assert_eq!(
            b.decode(&[7.0, -3.0, 2.0, -9.0]),
            ScheduleParams {
                horizon: 3.0,
                steps: 5,
                power: 3.0,
                alpha: 0.0
            }
        );
    }

    #[test]
    fn softmax_schedule_sums_to_horizon() {
        let s = unconstrained_schedule(&[0.0, 1.0, -1.0, 0.5], 2.0).unwrap();
        assert!((s.total() - 2.0).abs() < 1e-12);
        let flat = unconstrained_schedule(&[0.3; 20], 2.0).unwrap();
        assert!(flat.intervals().iter().all(|d| (d - 0.1).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn blended_invariants(t in 0.1f64..5.0, n in 1usize..60, p in 1.0f64..4.0, a in 0.0f64..=1.0) {
            let params = ScheduleParams { horizon: t, steps: n, power: p, alpha: a };
            let s = blended_schedule(&params).unwrap();
            prop_assert_eq!(s.len(), n);
            prop_assert!(s.intervals().iter().all(|d| *d > 0.0));
            prop_assert!((s.intervals().iter().sum::<f64>() - t).abs() < 1e-9);
        }

        #[test]
        fn blended_is_lipschitz_in_alpha(t in 0.5f64..3.0, n in 2usize..40, p in 1.0f64..3.0, a in 0.0f64..0.99, da in 0.0f64..0.01) {
            let s0 = blended_schedule(&ScheduleParams { horizon: t, steps: n, power: p, alpha: a }).unwrap();
            let s1 = blended_schedule(&ScheduleParams { horizon: t, steps: n, power: p, alpha: a + da }).unwrap();
            let bound = (1..=n).map(|i| { let f = i as f64 / n as f64; (f - f.powf(p)).abs() }).fold(0.0, f64::max);
            let b0 = s0.breakpoints();
            let b1 = s1.breakpoints();
            for (x, y) in b0.iter().zip(&b1) {
                prop_assert!((x - y).abs() <= t * da * bound + 1e-12);
            }
        }

        #[test]
        fn decode_stays_in_bounds(r in proptest::array::uniform4(-2.0f64..2.0)) {
            let b = ActionBounds::default();
            let p = b.decode(&r);
            prop_assert!(p.validate().is_ok());
            prop_assert!((5..=30).contains(&p.steps));
        }
    }
}
