//! Sampling-based local planners evaluated under a supplied fidelity schedule.

mod cost;
mod dwa;
mod mppi;
mod select;

pub use cost::{clearance_penalty, trajectory_cost, CostWeights};
pub use dwa::{dwa_candidates, dwa_evaluate, dwa_plan, dynamic_window, DynamicWindow};
pub use mppi::{log_mppi_weights, logmppi_plan, mppi_plan, mppi_weights, retime_nominal, SamplingOutcome};
pub use select::{blend_controls, select_and_blend, SafetyContext};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, ControlSequence, RobotState, VelocityLimits};
use crate::error::{AdpError, Result};
use crate::rng;
use crate::schedule::FidelitySchedule;
use crate::world::{OccupancyWorld, Point2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerVariant {
    Dwa,
    Mppi,
    #[serde(rename = "logmppi")]
    LogMppi,
}

impl PlannerVariant {
    pub fn label(&self) -> &'static str {
        match self {
            PlannerVariant::Dwa => "dwa",
            PlannerVariant::Mppi => "mppi",
            PlannerVariant::LogMppi => "logmppi",
        }
    }
}

impl std::str::FromStr for PlannerVariant {
    type Err = AdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dwa" => Ok(Self::Dwa),
            "mppi" => Ok(Self::Mppi),
            "logmppi" | "log-mppi" | "log_mppi" => Ok(Self::LogMppi),
            other => Err(AdpError::Config(format!("unknown planner variant `{other}`"))),
        }
    }
}

/// Planner configuration block. Keys: `variant`, `lambda`, `sigma_v`,
/// `sigma_w`, `samples`, `select_top`, `weights.*`, `limits.*`,
/// `control_period`, plus the DWA grid and geometry terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub variant: PlannerVariant,
    pub dwa_v_samples: usize,
    pub dwa_w_samples: usize,
    pub samples: usize,
    pub lambda: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
    pub select_top: usize,
    pub blend_eps: f64,
    pub weights: CostWeights,
    pub limits: VelocityLimits,
    pub control_period: f64,
    pub robot_radius: f64,
    /// Clearance below which the planner's obstacle term is active.
    pub d_safe: f64,
    pub lookahead: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            variant: PlannerVariant::Dwa,
            dwa_v_samples: 20,
            dwa_w_samples: 20,
            samples: 550,
            lambda: 0.3,
            sigma_v: 0.3,
            sigma_w: 0.5,
            select_top: 10,
            blend_eps: 1e-6,
            weights: CostWeights::default(),
            limits: VelocityLimits::default(),
            control_period: 0.1,
            robot_radius: 0.3,
            d_safe: 0.5,
            lookahead: 2.0,
        }
    }
}

impl PlannerConfig {
    pub fn with_variant(variant: PlannerVariant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        self.weights.validate()?;
        let bad = |m: &str| Err(AdpError::Config(m.to_string()));
        if self.dwa_v_samples == 0 || self.dwa_w_samples == 0 || self.samples == 0 {
            return bad("sample counts must be at least 1");
        }
        if self.select_top == 0 || self.select_top > self.samples.max(self.dwa_v_samples * self.dwa_w_samples) {
            return bad("select_top must lie in [1, sample count]");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if self.sigma_v < 0.0 || self.sigma_w < 0.0 {
            return bad("sigma must be non-negative");
        }
        if !(self.control_period > 0.0) || self.robot_radius < 0.0 || !(self.d_safe > 0.0) {
            return bad("control_period and d_safe must be positive, robot_radius non-negative");
        }
        Ok(())
    }
}

/// Inputs shared by every planner for one cycle.
#[derive(Clone, Copy, Debug)]
pub struct PlanRequest<'a> {
    pub state: &'a RobotState,
    pub world: &'a OccupancyWorld,
    pub local_goal: Point2,
    pub schedule: &'a FidelitySchedule,
}

/// Per-agent planner: owns the MPPI nominal sequence between cycles.
#[derive(Clone, Debug)]
pub struct LocalPlanner {
    config: PlannerConfig,
    seed: u64,
    cycle: u64,
    nominal: Option<(ControlSequence, FidelitySchedule)>,
}

impl LocalPlanner {
    pub fn new(config: PlannerConfig, seed: u64) -> Self {
        Self {
            config,
            seed,
            cycle: 0,
            nominal: None,
        }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn reset(&mut self, seed: u64) {
        self.seed = seed;
        self.cycle = 0;
        self.nominal = None;
    }

    pub fn plan(&mut self, req: &PlanRequest<'_>) -> Result<Control> {
        let cycle_seed = rng::derive_seed(self.seed, self.cycle);
        self.cycle += 1;
        match self.config.variant {
            PlannerVariant::Dwa => dwa_plan(req, &self.config),
            PlannerVariant::Mppi | PlannerVariant::LogMppi => {
                let nominal = match &self.nominal {
                    Some((seq, old)) => retime_nominal(seq, old, req.schedule, self.config.control_period),
                    None => vec![self.config.limits.clamp(Control::new(req.state.v, req.state.w)); req.schedule.len()],
                };
                let out = if self.config.variant == PlannerVariant::Mppi {
                    mppi_plan(req, &self.config, &nominal, cycle_seed)
                } else {
                    logmppi_plan(req, &self.config, &nominal, cycle_seed)
                };
                match out {
                    Ok(o) => {
                        self.nominal = Some((o.nominal, req.schedule.clone()));
                        Ok(o.control)
                    }
                    Err(e) => {
                        self.nominal = None;
                        Err(e)
                    }
                }
            }
        }
    }
}
