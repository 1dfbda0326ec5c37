//! Twin-critic deterministic policy gradient learner, written against
//! `ndarray` with analytic gradients.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod nstep;
pub mod replay;
pub mod td3;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use mlp::{Activation, Layer, Mlp, MlpGrads};
pub use nstep::{accumulate_n_step, RawStep, Transition};
pub use replay::{ReplayBuffer, SharedReplay};
pub use td3::{td3_target, td3_update, Batch, Td3Agent, Td3Config, UpdateStats};
