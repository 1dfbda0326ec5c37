//! The schedule-selection environment: each step the agent picks a fidelity
//! schedule, the local planner plans under it, and the robot executes the
//! resulting command for one control period.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, Control, RobotState};
use crate::error::{AdpError, Result};
use crate::lidar::{cast_lidar, k_nearest_obstacle_distances, wrap_angle, LidarScan, BEAM_COUNT};
use crate::navgrid::CostToGo;
use crate::planner::{LocalPlanner, PlanRequest, PlannerConfig};
use crate::rl::{accumulate_n_step, Mlp, RawStep, Transition};
use crate::rng;
use crate::schedule::{
    blended_schedule, ddp_schedule, incremental_schedule, unconstrained_schedule, ActionBounds, FidelitySchedule,
    ScheduleParams,
};
use crate::world::{OccupancyWorld, Point2, Pose};

/// Velocity and goal features appended after the laser and previous action.
pub const EXTRA_FEATURES: usize = 6;
/// Scan entries considered by the obstacle penalty.
pub const NEAREST_OBSTACLES: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpace {
    /// `(T, N, p, α)` through the blending formula.
    #[default]
    Blended,
    /// Same parameters, interval order reversed.
    Incremental,
    /// One score per interval, softmax-normalized over a fixed horizon.
    Unconstrained,
}

impl ActionSpace {
    pub fn label(&self) -> &'static str {
        match self {
            ActionSpace::Blended => "blended",
            ActionSpace::Incremental => "incremental",
            ActionSpace::Unconstrained => "unconstrained",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub k_progress: f64,
    pub r_collision: f64,
    pub k_time: f64,
    pub d_obs: f64,
    pub k_obs: f64,
    pub goal_radius: f64,
    pub max_steps: usize,
    /// Subtracted from each scan range before the obstacle penalty so that
    /// distances are measured from the robot's edge rather than its centre.
    pub clearance_offset: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            k_progress: 10.0,
            r_collision: -50.0,
            k_time: -0.05,
            d_obs: 0.05,
            k_obs: 1.0,
            goal_radius: 0.3,
            max_steps: 500,
            clearance_offset: 0.3,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_obs > 0.0) || self.max_steps == 0 || !(self.goal_radius > 0.0) || self.clearance_offset < 0.0 {
            return Err(AdpError::InvalidParams(
                "reward needs d_obs > 0, goal_radius > 0, max_steps ≥ 1 and clearance_offset ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-term reward, kept separate for logging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub progress: f64,
    pub collision: f64,
    pub time: f64,
    pub obstacle: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.progress + self.collision + self.time + self.obstacle
    }

    pub fn add(&mut self, other: &RewardTerms) {
        self.progress += other.progress;
        self.collision += other.collision;
        self.time += other.time;
        self.obstacle += other.obstacle;
    }
}

/// `−k_obs · Σ (1 − d/d_obs)²` over the nearest scan distances below `d_obs`.
pub fn obstacle_penalty(nearest: &[f64], cfg: &RewardConfig) -> f64 {
    -cfg.k_obs
        * nearest
            .iter()
            .filter(|&&d| d < cfg.d_obs)
            .map(|&d| (1.0 - d.max(0.0) / cfg.d_obs).powi(2))
            .sum::<f64>()
}

pub fn reward_terms(
    prev_dist: f64,
    new_dist: f64,
    collided: bool,
    scan: &LidarScan,
    cfg: &RewardConfig,
) -> RewardTerms {
    let nearest: Vec<f64> = k_nearest_obstacle_distances(scan, NEAREST_OBSTACLES)
        .into_iter()
        .map(|d| d - cfg.clearance_offset)
        .collect();
    RewardTerms {
        progress: cfg.k_progress * (prev_dist - new_dist),
        collision: if collided { cfg.r_collision } else { 0.0 },
        time: cfg.k_time,
        obstacle: obstacle_penalty(&nearest, cfg),
    }
}

pub fn compute_reward(prev_dist: f64, new_dist: f64, collided: bool, scan: &LidarScan, cfg: &RewardConfig) -> f64 {
    reward_terms(prev_dist, new_dist, collided, scan, cfg).total()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub action_space: ActionSpace,
    pub bounds: ActionBounds,
    /// Interval count for the unconstrained action space.
    pub unconstrained_steps: usize,
    pub unconstrained_horizon: f64,
    /// Raw unconstrained scores are multiplied by this before the softmax.
    pub unconstrained_scale: f64,
    pub max_range: f64,
    /// Observation laser length; must divide 720.
    pub laser_bins: usize,
    /// Ground-truth integration step.
    pub sim_dt: f64,
    /// Seeded perturbation of the start pose per episode (metres, radians).
    pub start_jitter_pos: f64,
    pub start_jitter_yaw: f64,
    pub reward: RewardConfig,
    pub planner: PlannerConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            action_space: ActionSpace::Blended,
            bounds: ActionBounds::default(),
            unconstrained_steps: 20,
            unconstrained_horizon: 2.0,
            unconstrained_scale: 2.0,
            max_range: 10.0,
            laser_bins: BEAM_COUNT,
            sim_dt: 0.001,
            start_jitter_pos: 0.0,
            start_jitter_yaw: 0.0,
            reward: RewardConfig::default(),
            planner: PlannerConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        self.planner.validate()?;
        if self.laser_bins == 0 || !BEAM_COUNT.is_multiple_of(self.laser_bins) {
            return Err(AdpError::InvalidParams(format!(
                "laser_bins must divide {BEAM_COUNT}, got {}",
                self.laser_bins
            )));
        }
        if !(self.max_range > 0.0 && self.sim_dt > 0.0 && self.sim_dt <= self.planner.control_period) {
            return Err(AdpError::InvalidParams(
                "need max_range > 0 and 0 < sim_dt ≤ control_period".into(),
            ));
        }
        if self.unconstrained_steps == 0 || !(self.unconstrained_horizon > 0.0) {
            return Err(AdpError::InvalidParams(
                "unconstrained schedule needs steps ≥ 1 and a positive horizon".into(),
            ));
        }
        if self.start_jitter_pos < 0.0 || self.start_jitter_yaw < 0.0 {
            return Err(AdpError::InvalidParams("start jitter must be non-negative".into()));
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        match self.action_space {
            ActionSpace::Blended | ActionSpace::Incremental => 4,
            ActionSpace::Unconstrained => self.unconstrained_steps,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.laser_bins + self.action_dim() + EXTRA_FEATURES
    }

    /// Schedule for a raw action in `[−1, 1]^d`.
    pub fn decode(&self, raw: &[f64]) -> Result<FidelitySchedule> {
        if raw.len() != self.action_dim() {
            return Err(AdpError::ShapeMismatch {
                expected: self.action_dim(),
                got: raw.len(),
            });
        }
        match self.action_space {
            ActionSpace::Blended | ActionSpace::Incremental => {
                let params = self.bounds.decode(&[raw[0], raw[1], raw[2], raw[3]]);
                if self.action_space == ActionSpace::Blended {
                    blended_schedule(&params)
                } else {
                    incremental_schedule(&params)
                }
            }
            ActionSpace::Unconstrained => {
                let scores: Vec<f64> = raw
                    .iter()
                    .map(|r| if r.is_nan() { 0.0 } else { r.clamp(-1.0, 1.0) } * self.unconstrained_scale)
                    .collect();
                unconstrained_schedule(&scores, self.unconstrained_horizon)
            }
        }
    }

    /// Raw action whose decoded schedule approximates the decremental
    /// baseline `(T=2, N=20, p=1.7, α=0)`, kept strictly inside `(−1, 1)`.
    pub fn baseline_action(&self) -> Vec<f64> {
        const LIMIT: f64 = 0.95;
        match self.action_space {
            ActionSpace::Blended | ActionSpace::Incremental => {
                let p = ScheduleParams {
                    horizon: 2.0,
                    steps: 20,
                    power: 1.7,
                    alpha: 0.0,
                };
                self.bounds.encode(&p).iter().map(|x| x.clamp(-LIMIT, LIMIT)).collect()
            }
            ActionSpace::Unconstrained => {
                let n = self.unconstrained_steps;
                let ddp = ddp_schedule(self.unconstrained_horizon, n, 1.7).expect("valid baseline");
                let logs: Vec<f64> = ddp.intervals().iter().map(|d| d.ln()).collect();
                let mean = logs.iter().sum::<f64>() / n as f64;
                logs.iter()
                    .map(|l| ((l - mean) / self.unconstrained_scale).clamp(-LIMIT, LIMIT))
                    .collect()
            }
        }
    }
}

/// Flattened as `laser ‖ prev_action ‖ v, w ‖ local dist, local bearing, goal dist, goal bearing`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaObservation {
    pub laser: Vec<f64>,
    pub prev_action: Vec<f64>,
    pub v: f64,
    pub w: f64,
    pub goal_info: [f64; 4],
}

impl MetaObservation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.laser.len() + self.prev_action.len() + EXTRA_FEATURES);
        out.extend_from_slice(&self.laser);
        out.extend_from_slice(&self.prev_action);
        out.extend_from_slice(&[self.v, self.w]);
        out.extend_from_slice(&self.goal_info);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub outcome: Option<Outcome>,
    pub control: Control,
    pub terms: RewardTerms,
    /// The planner found no collision-free candidate; the robot was stopped.
    pub planner_failed: bool,
}

/// One robot in one world with its planner.
#[derive(Clone, Debug)]
pub struct MetaEnv {
    world: Arc<OccupancyWorld>,
    field: Arc<CostToGo>,
    cfg: EnvConfig,
    planner: LocalPlanner,
    state: RobotState,
    prev_action: Vec<f64>,
    scan: LidarScan,
    steps: usize,
    time: f64,
    outcome: Option<Outcome>,
}

impl MetaEnv {
    pub fn new(world: Arc<OccupancyWorld>, cfg: EnvConfig) -> Result<Self> {
        let field = Arc::new(CostToGo::new(&world, cfg.planner.robot_radius));
        Self::with_field(world, field, cfg)
    }

    /// Reuses a precomputed cost-to-go field for `world`.
    pub fn with_field(world: Arc<OccupancyWorld>, field: Arc<CostToGo>, cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let state = RobotState::at_rest(world.start());
        let scan = cast_lidar(&world, &state.pose(), cfg.max_range);
        Ok(Self {
            planner: LocalPlanner::new(cfg.planner.clone(), 0),
            prev_action: vec![0.0; cfg.action_dim()],
            world,
            field,
            cfg,
            state,
            scan,
            steps: 0,
            time: 0.0,
            outcome: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &OccupancyWorld {
        &self.world
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn elapsed(&self) -> f64 {
        self.time
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    /// Restarts from the world's start pose, perturbed by the configured jitter.
    pub fn reset(&mut self, seed: u64) -> MetaObservation {
        self.planner.reset(rng::derive_seed(seed, 1));
        self.state = RobotState::at_rest(self.jittered_start(seed));
        self.prev_action = vec![0.0; self.cfg.action_dim()];
        self.scan = cast_lidar(&self.world, &self.state.pose(), self.cfg.max_range);
        self.steps = 0;
        self.time = 0.0;
        self.outcome = None;
        self.observe()
    }

    fn jittered_start(&self, seed: u64) -> Pose {
        let start = self.world.start();
        if self.cfg.start_jitter_pos == 0.0 && self.cfg.start_jitter_yaw == 0.0 {
            return start;
        }
        let mut r = rng::stream(seed, 2);
        let (jp, jy) = (self.cfg.start_jitter_pos, self.cfg.start_jitter_yaw);
        for _ in 0..20 {
            let dx = if jp > 0.0 { r.random_range(-jp..=jp) } else { 0.0 };
            let dy = if jp > 0.0 { r.random_range(-jp..=jp) } else { 0.0 };
            let dyaw = if jy > 0.0 { r.random_range(-jy..=jy) } else { 0.0 };
            let p = Pose::new(start.x + dx, start.y + dy, wrap_angle(start.yaw + dyaw));
            if !self.world.is_collision_at(p.x, p.y, self.cfg.planner.robot_radius) {
                return p;
            }
        }
        start
    }

    pub fn goal_distance(&self) -> f64 {
        self.state.pose().position().dist(self.world.goal())
    }

    /// Planner target: the lookahead point on the shortest path, or, once the
    /// goal is within the lookahead, a point on the ray through the goal, up to
    /// the lookahead distance within free space, so the robot does not crawl into the goal disc.
    pub fn local_goal(&self) -> Point2 {
        let here = self.state.pose().position();
        let lookahead = self.cfg.planner.lookahead;
        let target = self.field.local_goal(here, lookahead);
        let goal = self.world.goal();
        let d = here.dist(goal);
        if target != goal || d <= 1e-9 || d >= lookahead {
            return target;
        }
        let dir = ((goal.x - here.x) / d, (goal.y - here.y) / d);
        let beyond = self.field.free_run(goal, dir, lookahead - d);
        Point2::new(goal.x + dir.0 * beyond, goal.y + dir.1 * beyond)
    }

    pub fn observe(&self) -> MetaObservation {
        let laser = if self.cfg.laser_bins == BEAM_COUNT {
            self.scan.ranges.clone()
        } else {
            self.scan.min_pooled(self.cfg.laser_bins)
        };
        let max = self.cfg.max_range;
        let pose = self.state.pose();
        let here = pose.position();
        let relative = |p: Point2| {
            let bearing = if p.dist(here) > 0.0 {
                wrap_angle((p.y - here.y).atan2(p.x - here.x) - pose.yaw)
            } else {
                0.0
            };
            (here.dist(p), bearing)
        };
        let (ld, lb) = relative(self.field.local_goal(here, self.cfg.planner.lookahead));
        let (gd, gb) = relative(self.world.goal());
        MetaObservation {
            laser: laser.iter().map(|r| (r / max * 2.0 - 1.0).clamp(-1.0, 1.0)).collect(),
            prev_action: self.prev_action.clone(),
            v: self.state.v,
            w: self.state.w,
            goal_info: [ld, lb, gd, gb],
        }
    }

    /// Decodes `action`, plans once under that schedule and executes.
    pub fn step(&mut self, action: &[f64]) -> Result<(MetaObservation, f64, bool, StepInfo)> {
        let schedule = self.cfg.decode(action)?;
        self.step_with_schedule(action, &schedule)
    }

    /// Plans under `schedule` and executes; `action` is what the next
    /// observation reports as the previous action.
    pub fn step_with_schedule(
        &mut self,
        action: &[f64],
        schedule: &FidelitySchedule,
    ) -> Result<(MetaObservation, f64, bool, StepInfo)> {
        if self.outcome.is_some() {
            return Err(AdpError::InvalidInput("step called on a finished episode".into()));
        }
        if action.len() != self.cfg.action_dim() {
            return Err(AdpError::ShapeMismatch {
                expected: self.cfg.action_dim(),
                got: action.len(),
            });
        }
        let local_goal = self.local_goal();
        let req = PlanRequest {
            state: &self.state,
            world: &self.world,
            local_goal,
            schedule,
        };
        let (control, planner_failed) = match self.planner.plan(&req) {
            Ok(u) => (u, false),
            Err(AdpError::NoFeasibleTrajectory { .. }) => (Control::new(0.0, 0.0), true),
            Err(e) => return Err(e),
        };
        self.execute(action, control, planner_failed)
    }

    /// Executes `control` for one control period, bypassing the planner.
    pub fn step_with_control(
        &mut self,
        action: &[f64],
        control: Control,
    ) -> Result<(MetaObservation, f64, bool, StepInfo)> {
        if self.outcome.is_some() {
            return Err(AdpError::InvalidInput("step called on a finished episode".into()));
        }
        if action.len() != self.cfg.action_dim() {
            return Err(AdpError::ShapeMismatch {
                expected: self.cfg.action_dim(),
                got: action.len(),
            });
        }
        self.execute(action, control, false)
    }

    fn execute(
        &mut self,
        action: &[f64],
        control: Control,
        planner_failed: bool,
    ) -> Result<(MetaObservation, f64, bool, StepInfo)> {
        let prev_dist = self.goal_distance();
        let period = self.cfg.planner.control_period;
        let substeps = (period / self.cfg.sim_dt).round().max(1.0) as usize;
        let dt = period / substeps as f64;
        let radius = self.cfg.planner.robot_radius;
        let goal = self.world.goal();
        let mut outcome = None;
        for k in 1..=substeps {
            self.state = step(&self.state, control, dt)?;
            let p = self.state.pose().position();
            if self.world.is_collision_at(p.x, p.y, radius) {
                outcome = Some(Outcome::Collision);
            } else if p.dist(goal) <= self.cfg.reward.goal_radius {
                outcome = Some(Outcome::Success);
            }
            if outcome.is_some() {
                self.time += k as f64 * dt;
                break;
            }
        }
        if outcome.is_none() {
            self.time += period;
        }
        self.steps += 1;
        if outcome.is_none() && self.steps >= self.cfg.reward.max_steps {
            outcome = Some(Outcome::Timeout);
        }
        if outcome == Some(Outcome::Collision) {
            self.state.v = 0.0;
            self.state.w = 0.0;
        }
        self.scan = cast_lidar(&self.world, &self.state.pose(), self.cfg.max_range);
        let terms = reward_terms(
            prev_dist,
            self.goal_distance(),
            outcome == Some(Outcome::Collision),
            &self.scan,
            &self.cfg.reward,
        );
        self.prev_action = action.to_vec();
        self.outcome = outcome;
        let info = StepInfo {
            outcome,
            control,
            terms,
            planner_failed,
        };
        Ok((self.observe(), terms.total(), outcome.is_some(), info))
    }
}

/// Where each step's schedule comes from.
#[derive(Clone, Debug)]
pub enum SchedulePolicy {
    /// The same schedule every step; the observed previous action stays zero.
    Fixed(FidelitySchedule),
    /// A deterministic actor network over flattened observations.
    Learned(Arc<Mlp>),
}

impl SchedulePolicy {
    pub fn label(&self) -> &'static str {
        match self {
            SchedulePolicy::Fixed(_) => "fixed",
            SchedulePolicy::Learned(_) => "learned",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpisodeMode {
    /// Gaussian noise of this standard deviation on raw actions, then clipped.
    Explore {
        noise_std: f64,
    },
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub success: bool,
    pub traversal_time: f64,
    pub collided: bool,
    pub timeout: bool,
    pub steps: usize,
    pub world_seed: u64,
    pub cumulative_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutput {
    pub record: EpisodeRecord,
    pub steps: Vec<RawStep>,
    pub terms: RewardTerms,
    /// Robot poses, starting with the initial pose.
    pub path: Vec<Pose>,
    pub planner_failures: usize,
}

impl EpisodeOutput {
    pub fn transitions(&self, gamma: f64, n: usize) -> Vec<Transition> {
        accumulate_n_step(&self.steps, gamma, n)
    }
}

/// Runs one episode to termination. Deterministic in `seed`.
pub fn run_episode(env: &mut MetaEnv, policy: &SchedulePolicy, mode: EpisodeMode, seed: u64) -> Result<EpisodeOutput> {
    let mut obs = env.reset(seed).to_vec();
    let d = env.config().action_dim();
    let mut noise_rng = rng::stream(seed, 3);
    let noise = match mode {
        EpisodeMode::Explore { noise_std } if noise_std > 0.0 => {
            Some(Normal::new(0.0, noise_std).map_err(|e| AdpError::InvalidParams(e.to_string()))?)
        }
        _ => None,
    };
    if let SchedulePolicy::Learned(actor) = policy {
        if actor.input_dim() != obs.len() || actor.output_dim() != d {
            return Err(AdpError::ShapeMismatch {
                expected: obs.len(),
                got: actor.input_dim(),
            });
        }
    }
    let mut steps = Vec::new();
    let mut terms = RewardTerms::default();
    let mut path = vec![env.state().pose()];
    let mut planner_failures = 0;
    loop {
        let (action, (next, reward, done, info)) = match policy {
            SchedulePolicy::Fixed(schedule) => {
                let a = vec![0.0; d];
                let out = env.step_with_schedule(&a, schedule)?;
                (a, out)
            }
            SchedulePolicy::Learned(actor) => {
                let mut a = actor.forward(&obs)?;
                if let Some(n) = &noise {
                    for x in &mut a {
                        *x = (*x + n.sample(&mut noise_rng)).clamp(-1.0, 1.0);
                    }
                }
                let out = env.step(&a)?;
                (a, out)
            }
        };
        let next = next.to_vec();
        terms.add(&info.terms);
        planner_failures += info.planner_failed as usize;
        path.push(env.state().pose());
        steps.push(RawStep {
            state: std::mem::replace(&mut obs, next.clone()),
            action,
            reward,
            next_state: next,
            done: matches!(info.outcome, Some(Outcome::Success | Outcome::Collision)),
        });
        if done {
            break;
        }
    }
    let outcome = env.outcome().expect("loop exits on termination");
    let record = EpisodeRecord {
        success: outcome == Outcome::Success,
        traversal_time: env.elapsed(),
        collided: outcome == Outcome::Collision,
        timeout: outcome == Outcome::Timeout,
        steps: steps.len(),
        world_seed: env.world().seed(),
        cumulative_reward: steps.iter().map(|s| s.reward).sum(),
    };
    Ok(EpisodeOutput {
        record,
        steps,
        terms,
        path,
        planner_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lidar::BEAM_COUNT;
    use crate::rl::Activation;
    use crate::schedule::ddp_schedule;

    fn scan_with(nearest: &[f64]) -> LidarScan {
        let mut ranges = vec![10.0; BEAM_COUNT];
        ranges[..nearest.len()].copy_from_slice(nearest);
        LidarScan {
            ranges,
            max_range: 10.0,
            frame_pose: Pose::new(0.0, 0.0, 0.0),
        }
    }

    fn literal() -> RewardConfig {
        RewardConfig {
            clearance_offset: 0.0,
            ..RewardConfig::default()
        }
    }

    #[test]
    fn obstacle_at_threshold_contributes_nothing() {
        let r = compute_reward(1.0, 1.0, false, &scan_with(&[0.05]), &literal());
        assert_eq!(r, literal().k_time);
    }

    #[test]
    fn obstacle_at_half_threshold() {
        let t = reward_terms(1.0, 1.0, false, &scan_with(&[0.025]), &literal());
        assert!((t.obstacle + 0.25).abs() < 1e-12);
    }

    #[test]
    fn only_ten_nearest_count() {
        let t = reward_terms(1.0, 1.0, false, &scan_with(&[0.0; 12]), &literal());
        assert!((t.obstacle + 10.0).abs() < 1e-12);
    }

    #[test]
    fn offset_measures_from_robot_edge() {
        let t = reward_terms(2.0, 1.5, true, &scan_with(&[0.325]), &RewardConfig::default());
        assert!((t.obstacle + 0.25).abs() < 1e-12);
        assert!((t.progress - 5.0).abs() < 1e-12);
        assert_eq!(t.collision, -50.0);
    }

    fn open_world() -> Arc<OccupancyWorld> {
        Arc::new(OccupancyWorld::empty(100, 100, 0.1, Pose::new(2.0, 5.0, 0.0), Point2::new(8.0, 5.0)).unwrap())
    }

    #[test]
    fn observation_layout() {
        for (space, d) in [(ActionSpace::Blended, 4), (ActionSpace::Unconstrained, 20)] {
            let cfg = EnvConfig {
                action_space: space,
                ..EnvConfig::default()
            };
            let mut env = MetaEnv::new(open_world(), cfg.clone()).unwrap();
            let obs = env.reset(0).to_vec();
            assert_eq!(obs.len(), 726 + d);
            assert_eq!(cfg.obs_dim(), 726 + d);
            assert!(obs[..720].iter().all(|x| (-1.0..=1.0).contains(x)));
            let goal = &obs[obs.len() - 4..];
            assert!((goal[2] - 6.0).abs() < 1e-12 && goal[3].abs() < 1e-12);
        }
        let cfg = EnvConfig {
            laser_bins: 72,
            ..EnvConfig::default()
        };
        assert_eq!(MetaEnv::new(open_world(), cfg).unwrap().reset(0).to_vec().len(), 82);
    }

    #[test]
    fn baseline_action_decodes_near_ddp() {
        let cfg = EnvConfig::default();
        let s = cfg.decode(&cfg.baseline_action()).unwrap();
        let ddp = ddp_schedule(2.0, 20, 1.7).unwrap();
        assert_eq!(s.len(), 20);
        for (a, b) in s.intervals().iter().zip(ddp.intervals()) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
        let unc = EnvConfig {
            action_space: ActionSpace::Unconstrained,
            ..EnvConfig::default()
        };
        let s = unc.decode(&unc.baseline_action()).unwrap();
        assert!((s.total() - 2.0).abs() < 1e-12);
        assert!(s.intervals().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn straight_drive_into_wall_collides() {
        let mut world = OccupancyWorld::empty(60, 30, 0.1, Pose::new(1.0, 1.5, 0.0), Point2::new(5.5, 1.5)).unwrap();
        for row in 0..30 {
            world.set_occupied(35, row, true);
        }
        let mut env = MetaEnv::new(Arc::new(world), EnvConfig::default()).unwrap();
        env.reset(0);
        let mut last = None;
        while env.outcome().is_none() {
            last = Some(env.step_with_control(&[0.0; 4], Control::new(1.0, 0.0)).unwrap());
        }
        let (_, reward, done, info) = last.unwrap();
        assert!(done);
        assert_eq!(info.outcome, Some(Outcome::Collision));
        assert_eq!(info.terms.collision, -50.0);
        assert!(reward < -40.0);
        // The disc touches the wall face at x = 3.5 once its centre passes 3.2.
        assert!((env.elapsed() - 2.2).abs() <= 0.001 + 1e-9, "{}", env.elapsed());
        assert!(env.step_with_control(&[0.0; 4], Control::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn eval_is_deterministic_and_zero_noise_matches() {
        let cfg = EnvConfig {
            laser_bins: 72,
            ..EnvConfig::default()
        };
        let actor = Arc::new(Mlp::new(&[cfg.obs_dim(), 8, 4], Activation::Tanh, &mut rng::seeded(1)));
        let policy = SchedulePolicy::Learned(actor);
        let mut env = MetaEnv::new(open_world(), cfg).unwrap();
        let a = run_episode(&mut env, &policy, EpisodeMode::Eval, 5).unwrap();
        let b = run_episode(&mut env, &policy, EpisodeMode::Eval, 5).unwrap();
        let c = run_episode(&mut env, &policy, EpisodeMode::Explore { noise_std: 0.0 }, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.record.success);
        assert!((a.terms.total() - a.record.cumulative_reward).abs() < 1e-9);
    }

    #[test]
    fn ddp_schedule_reaches_goal_in_open_world() {
        let mut env = MetaEnv::new(open_world(), EnvConfig::default()).unwrap();
        let policy = SchedulePolicy::Fixed(ddp_schedule(2.0, 20, 1.7).unwrap());
        let out = run_episode(&mut env, &policy, EpisodeMode::Eval, 0).unwrap();
        assert!(out.record.success, "{:?}", out.record);
        assert!(out.record.traversal_time < 8.0);
        assert_eq!(out.steps.len(), out.record.steps);
        assert!(out.steps.last().unwrap().done);
    }

    #[test]
    fn timeout_after_max_steps() {
        let cfg = EnvConfig {
            reward: RewardConfig {
                max_steps: 3,
                ..RewardConfig::default()
            },
            ..EnvConfig::default()
        };
        let mut env = MetaEnv::new(open_world(), cfg).unwrap();
        let policy = SchedulePolicy::Fixed(ddp_schedule(2.0, 20, 1.7).unwrap());
        let out = run_episode(&mut env, &policy, EpisodeMode::Eval, 0).unwrap();
        assert!(out.record.timeout && !out.record.success && !out.record.collided);
        assert_eq!(out.record.steps, 3);
        assert!(!out.steps.last().unwrap().done);
    }
}
