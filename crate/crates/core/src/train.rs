//! Cycle-synchronized actor/learner training.
//!
//! Each assignment cycle hands every actor a parameter snapshot and up to
//! `episodes_per_actor` (at most two) episodes on training worlds chosen
//! round-robin. Actors run concurrently and push each finished episode into
//! the shared replay buffer; the learner then takes `updates_per_cycle`
//! gradient steps once every actor has reached the barrier.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{run_episode, EnvConfig, EpisodeMode, EpisodeRecord, MetaEnv, SchedulePolicy};
use crate::error::{AdpError, Result};
use crate::navgrid::CostToGo;
use crate::rl::{save_checkpoint, td3_update, Mlp, SharedReplay, Td3Agent, Td3Config};
use crate::rng;
use crate::world::OccupancyWorld;

/// Hard cap on episodes an actor may run within one cycle.
pub const MAX_EPISODES_PER_ACTOR: usize = 2;

const LEARNER_TAG: u64 = 0x4C45_4152;
const EVAL_TAG: u64 = 0x4556_414C;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub actor_count: usize,
    pub cycles: usize,
    pub episodes_per_actor: usize,
    pub updates_per_cycle: usize,
    /// Transitions required before the first update (never fewer than a batch).
    pub warmup: usize,
    /// Evaluate after every this many cycles; 0 evaluates only at the start and end.
    pub eval_every: usize,
    pub eval_episodes_per_world: usize,
    /// Write a checkpoint every this many cycles; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Start the actor near the decremental baseline schedule.
    pub init_from_baseline: bool,
    pub env: EnvConfig,
    pub td3: Td3Config,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            actor_count: 4,
            cycles: 100,
            episodes_per_actor: MAX_EPISODES_PER_ACTOR,
            updates_per_cycle: 100,
            warmup: 1000,
            eval_every: 10,
            eval_episodes_per_world: 1,
            checkpoint_every: 0,
            init_from_baseline: true,
            env: EnvConfig::default(),
            td3: Td3Config::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.actor_count == 0 {
            return Err(AdpError::Config("actor_count must be at least 1".into()));
        }
        if self.episodes_per_actor == 0 || self.episodes_per_actor > MAX_EPISODES_PER_ACTOR {
            return Err(AdpError::Config(format!(
                "episodes_per_actor must lie in 1..={MAX_EPISODES_PER_ACTOR}"
            )));
        }
        if self.eval_episodes_per_world == 0 {
            return Err(AdpError::Config("eval_episodes_per_world must be at least 1".into()));
        }
        self.env.validate()?;
        self.td3.validate()
    }
}

/// One episode slot of an assignment cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub slot: usize,
    pub actor: usize,
    pub world: usize,
}

/// Episode slots for `cycle`: `min(actors · per_actor, worlds)` slots, slot
/// `j` going to actor `j mod actors` on world `(cycle · slots + j) mod worlds`.
/// Within a cycle no world repeats and no actor exceeds `per_actor` episodes.
pub fn assignments(cycle: usize, actors: usize, per_actor: usize, worlds: usize) -> Vec<Assignment> {
    let slots = (actors * per_actor).min(worlds);
    (0..slots)
        .map(|j| Assignment {
            slot: j,
            actor: j % actors,
            world: (cycle * slots + j) % worlds,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub assignment: Assignment,
    pub record: EpisodeRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    pub cycle: usize,
    /// In slot order.
    pub episodes: Vec<EpisodeSummary>,
    pub updates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    /// Completed cycles at evaluation time.
    pub cycle: usize,
    pub eval_success_rate: f64,
    pub eval_mean_reward: f64,
    /// Means over the updates since the previous row; NaN when there were none.
    pub critic_loss: f64,
    pub actor_loss: f64,
}

pub fn log_to_csv(rows: &[TrainLogRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| AdpError::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| AdpError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AdpError::Parse(e.to_string()))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub agent: Td3Agent,
    pub log: Vec<TrainLogRow>,
    pub cycles: Vec<CycleReport>,
    pub buffer_len: usize,
}

/// A world with its cost-to-go field, shareable across threads.
#[derive(Clone, Debug)]
pub struct PreparedWorld {
    pub world: Arc<OccupancyWorld>,
    pub field: Arc<CostToGo>,
}

impl PreparedWorld {
    pub fn new(world: OccupancyWorld, robot_radius: f64) -> Self {
        let field = Arc::new(CostToGo::new(&world, robot_radius));
        Self {
            world: Arc::new(world),
            field,
        }
    }

    pub fn env(&self, cfg: &EnvConfig) -> Result<MetaEnv> {
        MetaEnv::with_field(self.world.clone(), self.field.clone(), cfg.clone())
    }
}

pub fn prepare(worlds: &[OccupancyWorld], robot_radius: f64) -> Vec<PreparedWorld> {
    worlds
        .par_iter()
        .map(|w| PreparedWorld::new(w.clone(), robot_radius))
        .collect()
}

/// Metadata stored alongside trained networks.
pub fn checkpoint_meta(env: &EnvConfig) -> Result<serde_json::Value> {
    let env = serde_json::to_value(env).map_err(|e| AdpError::Parse(e.to_string()))?;
    Ok(serde_json::json!({ "obs_dim": env_obs_dim(&env), "env": env }))
}

fn env_obs_dim(env: &serde_json::Value) -> Option<usize> {
    serde_json::from_value::<EnvConfig>(env.clone())
        .ok()
        .map(|c| c.obs_dim())
}

/// Recovers the environment configuration written by [`checkpoint_meta`].
pub fn env_from_meta(meta: &serde_json::Value) -> Result<EnvConfig> {
    let env = meta
        .get("env")
        .ok_or_else(|| AdpError::Parse("checkpoint meta lacks `env`".into()))?;
    serde_json::from_value(env.clone()).map_err(|e| AdpError::Parse(e.to_string()))
}

/// Fresh agent for `cfg`, optionally biased toward the baseline schedule.
pub fn initial_agent(cfg: &TrainConfig) -> Result<Td3Agent> {
    let mut agent = Td3Agent::new(
        cfg.env.obs_dim(),
        cfg.env.action_dim(),
        cfg.td3.clone(),
        rng::derive_seed(cfg.seed, 0),
    )?;
    if cfg.init_from_baseline {
        let bias: Vec<f64> = cfg.env.baseline_action().iter().map(|a| a.atanh()).collect();
        agent.set_actor_output_bias(&bias)?;
    }
    Ok(agent)
}

/// Success rate and mean cumulative reward of `policy` on `worlds`.
pub fn evaluate(
    policy: &SchedulePolicy,
    worlds: &[PreparedWorld],
    env_cfg: &EnvConfig,
    episodes_per_world: usize,
    seed: u64,
) -> Result<(f64, f64, Vec<EpisodeRecord>)> {
    let jobs: Vec<(usize, usize)> = (0..worlds.len())
        .flat_map(|w| (0..episodes_per_world).map(move |e| (w, e)))
        .collect();
    let records: Vec<EpisodeRecord> = jobs
        .par_iter()
        .map(|&(w, e)| {
            let mut env = worlds[w].env(env_cfg)?;
            let s = rng::derive_seed(rng::derive_seed(seed, w as u64), e as u64);
            Ok(run_episode(&mut env, policy, EpisodeMode::Eval, s)?.record)
        })
        .collect::<Result<_>>()?;
    let n = records.len().max(1) as f64;
    let success = records.iter().filter(|r| r.success).count() as f64 / n;
    let reward = records.iter().map(|r| r.cumulative_reward).sum::<f64>() / n;
    Ok((success, reward, records))
}

fn run_cycle(
    cycle: usize,
    cfg: &TrainConfig,
    worlds: &[PreparedWorld],
    snapshot: &Arc<Mlp>,
    replay: &SharedReplay,
) -> Result<Vec<EpisodeSummary>> {
    let slots = assignments(cycle, cfg.actor_count, cfg.episodes_per_actor, worlds.len());
    let cycle_seed = rng::derive_seed(cfg.seed, cycle as u64 + 1);
    let policy = SchedulePolicy::Learned(snapshot.clone());
    let mode = EpisodeMode::Explore {
        noise_std: cfg.td3.exploration_noise_std,
    };
    let (gamma, n) = (cfg.td3.gamma, cfg.td3.n_step);
    let actor_job = |actor: usize| -> Result<Vec<EpisodeSummary>> {
        let mut done = Vec::new();
        for a in slots.iter().filter(|a| a.actor == actor) {
            let mut env = worlds[a.world].env(&cfg.env)?;
            let out = run_episode(&mut env, &policy, mode, rng::derive_seed(cycle_seed, a.slot as u64))?;
            replay.push_episode(out.transitions(gamma, n));
            done.push(EpisodeSummary {
                assignment: *a,
                record: out.record,
            });
        }
        Ok(done)
    };
    let per_actor: Vec<Result<Vec<EpisodeSummary>>> = if cfg.actor_count == 1 {
        vec![actor_job(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.actor_count).map(|a| s.spawn(move || actor_job(a))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("actor thread panicked"))
                .collect()
        })
    };
    let mut episodes = Vec::with_capacity(slots.len());
    for r in per_actor {
        episodes.extend(r?);
    }
    episodes.sort_by_key(|e| e.assignment.slot);
    Ok(episodes)
}

fn mean_or_nan(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Trains from scratch. Evaluation uses `eval_worlds`, or the training
/// worlds when none are given. With `out_dir`, writes `train_log.csv`,
/// periodic checkpoints and `final.ckpt` there.
pub fn train(
    cfg: &TrainConfig,
    train_worlds: &[OccupancyWorld],
    eval_worlds: &[OccupancyWorld],
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_worlds.is_empty() {
        return Err(AdpError::Config("training needs at least one world".into()));
    }
    let radius = cfg.env.planner.robot_radius;
    let worlds = prepare(train_worlds, radius);
    let eval = if eval_worlds.is_empty() {
        worlds.clone()
    } else {
        prepare(eval_worlds, radius)
    };
    let meta = checkpoint_meta(&cfg.env)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut agent = initial_agent(cfg)?;
    let replay = SharedReplay::new(cfg.td3.replay_capacity);
    let learner_seed = rng::derive_seed(cfg.seed, LEARNER_TAG);
    let eval_seed = rng::derive_seed(cfg.seed, EVAL_TAG);
    let min_buffer = cfg.warmup.max(cfg.td3.batch);

    let mut log = Vec::new();
    let mut cycles = Vec::with_capacity(cfg.cycles);
    let (mut critic_losses, mut actor_losses) = (Vec::new(), Vec::new());
    let mut eval_row = |cycle: usize, agent: &Td3Agent, critic: &mut Vec<f64>, actor: &mut Vec<f64>| -> Result<()> {
        let policy = SchedulePolicy::Learned(Arc::new(agent.actor.clone()));
        let (success, reward, _) = evaluate(&policy, &eval, &cfg.env, cfg.eval_episodes_per_world, eval_seed)?;
        log.push(TrainLogRow {
            cycle,
            eval_success_rate: success,
            eval_mean_reward: reward,
            critic_loss: mean_or_nan(critic),
            actor_loss: mean_or_nan(actor),
        });
        critic.clear();
        actor.clear();
        Ok(())
    };
    eval_row(0, &agent, &mut critic_losses, &mut actor_losses)?;

    for cycle in 0..cfg.cycles {
        let snapshot = Arc::new(agent.actor.clone());
        let episodes = run_cycle(cycle, cfg, &worlds, &snapshot, &replay)?;
        let mut updates = 0;
        if replay.len() >= min_buffer {
            replay.with(|buffer| -> Result<()> {
                for _ in 0..cfg.updates_per_cycle {
                    let step = agent.updates;
                    let stats = td3_update(buffer, &mut agent, step, learner_seed)?;
                    critic_losses.push(stats.critic_loss);
                    if let Some(a) = stats.actor_loss {
                        actor_losses.push(a);
                    }
                    updates += 1;
                }
                Ok(())
            })?;
        }
        if !agent.actor.all_finite() || !agent.critic1.all_finite() || !agent.critic2.all_finite() {
            return Err(AdpError::InvalidParams(format!(
                "non-finite network parameters after cycle {}",
                cycle + 1
            )));
        }
        cycles.push(CycleReport {
            cycle,
            episodes,
            updates,
        });
        let done = cycle + 1;
        let last = done == cfg.cycles;
        if last || (cfg.eval_every > 0 && done % cfg.eval_every == 0) {
            eval_row(done, &agent, &mut critic_losses, &mut actor_losses)?;
        }
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && !last {
                save_checkpoint(&dir.join(format!("checkpoint_{done:05}.ckpt")), &agent, &meta)?;
            }
        }
    }
    if let Some(dir) = out_dir {
        save_checkpoint(&dir.join("final.ckpt"), &agent, &meta)?;
        std::fs::write(dir.join("train_log.csv"), log_to_csv(&log)?)?;
    }
    Ok(TrainOutcome {
        agent,
        log,
        cycles,
        buffer_len: replay.len(),
    })
}
