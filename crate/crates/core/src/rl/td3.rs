use ndarray::{s, Array1, Array2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Activation, Mlp};
use super::nstep::Transition;
use super::replay::ReplayBuffer;
use crate::error::{AdpError, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub exploration_noise_std: f64,
    pub batch: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub n_step: usize,
    pub replay_capacity: usize,
    /// Hidden widths of the actor's feature extractor.
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Scale applied to the actor's output-layer weights after init.
    pub actor_output_scale: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            exploration_noise_std: 0.1,
            batch: 256,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            n_step: 6,
            replay_capacity: super::replay::DEFAULT_CAPACITY,
            actor_hidden: vec![256],
            critic_hidden: vec![512, 256],
            actor_output_scale: 0.01,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AdpError::InvalidParams(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.policy_delay == 0 || self.batch == 0 || self.n_step == 0 || self.replay_capacity == 0 {
            return bad("policy_delay, batch, n_step and replay_capacity must be positive");
        }
        if self.target_noise_std < 0.0 || self.target_noise_clip < 0.0 || self.exploration_noise_std < 0.0 {
            return bad("noise parameters must be non-negative");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// Column-stacked minibatch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub returns: Array1<f64>,
    pub bootstrap: Array2<f64>,
    pub discount: Array1<f64>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Result<Self> {
        let items: Vec<&Transition> = items.into_iter().collect();
        let Some(first) = items.first() else {
            return Err(AdpError::InsufficientData { have: 0, need: 1 });
        };
        let (sd, ad) = (first.state.len(), first.action.len());
        let b = items.len();
        let mut batch = Batch {
            states: Array2::zeros((b, sd)),
            actions: Array2::zeros((b, ad)),
            returns: Array1::zeros(b),
            bootstrap: Array2::zeros((b, sd)),
            discount: Array1::zeros(b),
        };
        for (i, t) in items.iter().enumerate() {
            if t.state.len() != sd || t.bootstrap_state.len() != sd {
                return Err(AdpError::ShapeMismatch {
                    expected: sd,
                    got: t.state.len().max(t.bootstrap_state.len()),
                });
            }
            if t.action.len() != ad {
                return Err(AdpError::ShapeMismatch {
                    expected: ad,
                    got: t.action.len(),
                });
            }
            batch.states.row_mut(i).assign(&Array1::from(t.state.clone()));
            batch.actions.row_mut(i).assign(&Array1::from(t.action.clone()));
            batch
                .bootstrap
                .row_mut(i)
                .assign(&Array1::from(t.bootstrap_state.clone()));
            batch.returns[i] = t.n_step_return;
            batch.discount[i] = t.discount_pow;
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

fn concat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts agree")
}

fn q_values(critic: &Mlp, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array1<f64>> {
    Ok(critic
        .forward_batch(concat(states, actions).view())?
        .output()
        .column(0)
        .to_owned())
}

/// Clipped double-Q target with smoothed target actions:
/// `y = R + γᵐ · min(Q1', Q2')(s', clip(π'(s') + clip(ε, ±c), ±1))`.
/// Noise is drawn row-major from `noise_seed`.
pub fn td3_target(
    batch: &Batch,
    actor_t: &Mlp,
    c1_t: &Mlp,
    c2_t: &Mlp,
    cfg: &Td3Config,
    noise_seed: u64,
) -> Result<Array1<f64>> {
    let mut a = actor_t.forward_batch(batch.bootstrap.view())?.output().clone();
    if cfg.target_noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.target_noise_std).map_err(|e| AdpError::InvalidParams(e.to_string()))?;
        let mut r = rng::seeded(noise_seed);
        let c = cfg.target_noise_clip;
        a.mapv_inplace(|x| (x + normal.sample(&mut r).clamp(-c, c)).clamp(-1.0, 1.0));
    }
    let q1 = q_values(c1_t, &batch.bootstrap, &a)?;
    let q2 = q_values(c2_t, &batch.bootstrap, &a)?;
    let mut y = batch.returns.clone();
    for i in 0..y.len() {
        // A terminal window contributes nothing, even if a target Q is huge.
        if batch.discount[i] != 0.0 {
            y[i] += batch.discount[i] * q1[i].min(q2[i]);
        }
    }
    Ok(y)
}

/// Online and target networks plus their optimizers.
#[derive(Clone, Debug)]
pub struct Td3Agent {
    pub cfg: Td3Config,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    /// Number of completed `td3_update` calls.
    pub updates: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Present on steps where the actor was updated.
    pub actor_loss: Option<f64>,
}

impl Td3Agent {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: Td3Config, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::seeded(seed);
        let actor_sizes: Vec<usize> = std::iter::once(obs_dim)
            .chain(cfg.actor_hidden.iter().copied())
            .chain([act_dim])
            .collect();
        let critic_sizes: Vec<usize> = std::iter::once(obs_dim + act_dim)
            .chain(cfg.critic_hidden.iter().copied())
            .chain([1])
            .collect();
        let mut actor = Mlp::new(&actor_sizes, Activation::Tanh, &mut r);
        let last = actor.layers().len() - 1;
        actor.layers_mut()[last].weight *= cfg.actor_output_scale;
        let critic1 = Mlp::new(&critic_sizes, Activation::Identity, &mut r);
        let critic2 = Mlp::new(&critic_sizes, Activation::Identity, &mut r);
        Ok(Self::from_nets(
            cfg,
            actor.clone(),
            critic1.clone(),
            critic2.clone(),
            actor,
            critic1,
            critic2,
            0,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_nets(
        cfg: Td3Config,
        actor: Mlp,
        critic1: Mlp,
        critic2: Mlp,
        actor_target: Mlp,
        critic1_target: Mlp,
        critic2_target: Mlp,
        updates: u64,
    ) -> Self {
        Self {
            actor_opt: Adam::new(&actor, cfg.lr_actor),
            critic1_opt: Adam::new(&critic1, cfg.lr_critic),
            critic2_opt: Adam::new(&critic2, cfg.lr_critic),
            cfg,
            actor,
            critic1,
            critic2,
            actor_target,
            critic1_target,
            critic2_target,
            updates,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Overwrites the actor's (and its target's) output bias, shifting the
    /// initial policy mean to `tanh(bias)`.
    pub fn set_actor_output_bias(&mut self, bias: &[f64]) -> Result<()> {
        if bias.len() != self.act_dim() {
            return Err(AdpError::ShapeMismatch {
                expected: self.act_dim(),
                got: bias.len(),
            });
        }
        for net in [&mut self.actor, &mut self.actor_target] {
            let last = net.layers().len() - 1;
            net.layers_mut()[last].bias.assign(&Array1::from(bias.to_vec()));
        }
        Ok(())
    }

    pub fn nets(&self) -> [(&'static str, &Mlp); 6] {
        [
            ("actor", &self.actor),
            ("critic1", &self.critic1),
            ("critic2", &self.critic2),
            ("actor_target", &self.actor_target),
            ("critic1_target", &self.critic1_target),
            ("critic2_target", &self.critic2_target),
        ]
    }
}

fn critic_step(critic: &mut Mlp, opt: &mut Adam, input: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
    let cache = critic.forward_batch(input.view())?;
    let q = cache.output().column(0).to_owned();
    let b = y.len() as f64;
    let resid = &q - y;
    let loss = resid.mapv(|r| r * r).sum() / b;
    let upstream = (resid * (2.0 / b)).insert_axis(Axis(1));
    let (grads, _) = critic.backward_batch(&cache, upstream.view())?;
    opt.step(critic, &grads);
    Ok(loss)
}

/// One learner step: both critics regress onto the clipped double-Q target;
/// every `policy_delay`-th step the actor ascends Q1 and all targets move
/// toward their online nets by `tau`.
pub fn td3_update(buffer: &ReplayBuffer, agent: &mut Td3Agent, step_index: u64, seed: u64) -> Result<UpdateStats> {
    let cfg = agent.cfg.clone();
    if buffer.len() < cfg.batch {
        return Err(AdpError::InsufficientData {
            have: buffer.len(),
            need: cfg.batch,
        });
    }
    let mut r = rng::stream(seed, step_index);
    let idx = buffer.sample_indices(cfg.batch, &mut r);
    let batch = Batch::from_transitions(idx.iter().map(|&i| buffer.get(i).expect("index in range")))?;
    let noise_seed = rng::derive_seed(seed ^ 0x7A3F_0000_0000_0000, step_index);
    let y = td3_target(
        &batch,
        &agent.actor_target,
        &agent.critic1_target,
        &agent.critic2_target,
        &cfg,
        noise_seed,
    )?;

    let sa = concat(&batch.states, &batch.actions);
    let l1 = critic_step(&mut agent.critic1, &mut agent.critic1_opt, &sa, &y)?;
    let l2 = critic_step(&mut agent.critic2, &mut agent.critic2_opt, &sa, &y)?;
    let mut stats = UpdateStats {
        critic_loss: 0.5 * (l1 + l2),
        actor_loss: None,
    };

    if step_index.is_multiple_of(cfg.policy_delay) {
        let b = batch.len() as f64;
        let actor_cache = agent.actor.forward_batch(batch.states.view())?;
        let actions = actor_cache.output().clone();
        let critic_cache = agent.critic1.forward_batch(concat(&batch.states, &actions).view())?;
        let q = critic_cache.output().column(0).to_owned();
        stats.actor_loss = Some(-q.mean().unwrap_or(0.0));
        let up = Array2::from_elem((batch.len(), 1), -1.0 / b);
        let (_, d_input) = agent.critic1.backward_batch(&critic_cache, up.view())?;
        let d_action = d_input.slice(s![.., batch.states.ncols()..]).to_owned();
        let (grads, _) = agent.actor.backward_batch(&actor_cache, d_action.view())?;
        agent.actor_opt.step(&mut agent.actor, &grads);

        agent.actor_target.soft_update(&agent.actor, cfg.tau);
        agent.critic1_target.soft_update(&agent.critic1, cfg.tau);
        agent.critic2_target.soft_update(&agent.critic2, cfg.tau);
    }
    agent.updates += 1;
    Ok(stats)
}
