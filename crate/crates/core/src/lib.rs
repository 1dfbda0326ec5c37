//! Adaptive-fidelity local planning for a differential-drive robot.
//!
//! A learned policy picks, once per control cycle, the integration-interval
//! schedule that sampling planners (DWA, MPPI, Log-MPPI) use for their
//! rollouts. This crate holds the world model, kinematics, schedule family,
//! planners, a self-contained TD3 learner, the meta-environment that ties
//! them together, and the benchmark harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod lidar;
pub mod navgrid;
pub mod planner;
pub mod render;
pub mod rl;
pub mod rng;
pub mod schedule;
pub mod train;
pub mod world;

pub use bench::{barn_score, run_benchmark, BenchSettings, BenchmarkReport, MethodSpec, ReportRow, ScoreInput, Trial};
pub use config::{ExperimentConfig, WorldSource};
pub use dynamics::{rollout, step, Control, ControlSequence, RobotState, Trajectory, VelocityLimits};
pub use env::{ActionSpace, EnvConfig, EpisodeMode, EpisodeRecord, MetaEnv, RewardConfig, SchedulePolicy};
pub use error::{AdpError, Result};
pub use lidar::{cast_lidar, k_nearest_obstacle_distances, LidarScan};
pub use planner::{LocalPlanner, PlannerConfig, PlannerVariant};
pub use render::render_svg;
pub use rl::{Mlp, Td3Agent, Td3Config};
pub use schedule::{
    blended_schedule, ddp_schedule, decode_action, fixed_schedule, incremental_schedule, ActionBounds,
    FidelitySchedule, ScheduleKind, ScheduleParams,
};
pub use train::{train, PreparedWorld, TrainConfig, TrainLogRow, TrainOutcome};
pub use world::{generate_world, is_collision, CaParams, OccupancyWorld, Point2, Pose};
