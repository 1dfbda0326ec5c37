//! Shared fixtures for the criterion benches.

use adp_core::{ddp_schedule, generate_world, CaParams, FidelitySchedule, OccupancyWorld, RobotState};

/// A generated 30×30 world at 0.15 m.
pub fn cluttered_world() -> OccupancyWorld {
    generate_world(11, 30, 30, 0.15, &CaParams::default()).expect("seed 11 generates")
}

pub fn ddp() -> FidelitySchedule {
    ddp_schedule(2.0, 20, 1.7).expect("valid schedule")
}

pub fn start_state(world: &OccupancyWorld) -> RobotState {
    let s = world.start();
    RobotState::new(s.x, s.y, s.yaw, 0.5, 0.0)
}
