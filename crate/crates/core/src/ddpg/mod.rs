//! Deep deterministic policy gradient: networks, replay, updates and training.

mod agent;
mod mlp;
mod model;
mod replay;

pub use agent::{
    actor_forward, actor_objective_and_grad, actor_objective_and_grad_with, critic_forward,
    critic_loss_and_grad, exploration_std, explore, td_target, train, DdpgAgent, TrainOutcome,
};
pub use mlp::{Activation, Adam, ForwardCache, Mlp};
pub use model::{ActorModel, MODEL_MAGIC};
pub use replay::ReplayBuffer;

use crate::env::{Action, EpisodeConfig, Observation, ScenarioSampler, TorqueVectoringEnv};
use crate::error::{Error, Result};

/// Observation scales: forces and moment 1000, speeds 40 m/s, angles 1 rad, positions 500 m.
pub const OBS_SCALE: [f64; Observation::DIM] =
    [1000.0, 1000.0, 1000.0, 40.0, 40.0, 1.0, 1.0, 500.0, 500.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub tau: f64,
    pub minibatch: usize,
    /// Exploration variance at step 0, in raw action units squared.
    pub noise_variance: f64,
    /// Per-step multiplicative decay of the exploration variance.
    pub variance_decay: f64,
    pub buffer_capacity: usize,
    pub episodes: usize,
    pub hidden: [usize; 2],
    /// Rewards are multiplied by this before entering the critic targets.
    /// A positive factor leaves the optimal policy unchanged.
    pub reward_scale: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            critic_lr: 1e-3,
            actor_lr: 1e-4,
            tau: 1e-3,
            minibatch: 70,
            noise_variance: 30.0,
            variance_decay: 1e-3,
            buffer_capacity: 1_000_000,
            episodes: 650,
            hidden: [100, 100],
            reward_scale: 1e-5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.gamma) || !unit(self.tau) || !unit(self.variance_decay) {
            return Err(Error::Config(
                "gamma, tau and variance_decay must lie in [0, 1]".into(),
            ));
        }
        if !(self.critic_lr > 0.0 && self.actor_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.minibatch == 0 || self.buffer_capacity < self.minibatch {
            return Err(Error::Config(
                "minibatch must be positive and fit in the buffer".into(),
            ));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config("noise variance must be non-negative".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::Config("reward scale must be positive".into()));
        }
        Ok(())
    }
}

/// Input scaling and action range of an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub obs_scale: Vec<f64>,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
}

impl NetSpec {
    /// The torque-vectoring agent: 9 observations, 4 weights in [40, 1000].
    pub fn torque_vectoring() -> Self {
        Self {
            obs_scale: OBS_SCALE.to_vec(),
            action_dim: Action::DIM,
            action_low: Action::LOWER,
            action_high: Action::UPPER,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_scale.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_scale.is_empty() || self.obs_scale.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::Config("observation scales must be positive".into()));
        }
        if self.action_dim == 0 || !(self.action_low < self.action_high) {
            return Err(Error::Config("empty action space".into()));
        }
        Ok(())
    }

    pub fn normalize_obs(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter()
            .zip(&self.obs_scale)
            .map(|(o, s)| o / s)
            .collect()
    }

    fn mid(&self) -> f64 {
        0.5 * (self.action_low + self.action_high)
    }

    fn half(&self) -> f64 {
        0.5 * (self.action_high - self.action_low)
    }

    /// Raw action to [-1, 1].
    pub fn normalize_action(&self, a: f64) -> f64 {
        (a - self.mid()) / self.half()
    }

    /// tanh output to raw units: `low + (u + 1) / 2 * (high - low)`.
    pub fn denormalize_action(&self, u: f64) -> f64 {
        let a = self.action_low + (u + 1.0) * 0.5 * (self.action_high - self.action_low);
        a.clamp(self.action_low, self.action_high)
    }

    /// Critic input: normalized observation followed by normalized action.
    pub fn critic_input(&self, obs: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = self.normalize_obs(obs);
        x.extend(action.iter().map(|&a| self.normalize_action(a)));
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Action actually applied, after exploration and clamping.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

impl Transition {
    pub fn new(
        obs: &Observation,
        action: &Action,
        reward: f64,
        next: &Observation,
        done: bool,
    ) -> Self {
        Self {
            obs: obs.as_array().to_vec(),
            action: action.w_df.to_vec(),
            reward,
            next_obs: next.as_array().to_vec(),
            done,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self
                .obs
                .iter()
                .chain(&self.action)
                .chain(&self.next_obs)
                .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment driven by the training loop.
pub trait Environment {
    /// Starts episode number `episode` and returns the first observation.
    fn reset(&mut self, episode: usize) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;
}

/// Torque-vectoring environment with a fresh random scenario per episode.
#[derive(Debug, Clone)]
pub struct RandomizedTvEnv {
    pub env: TorqueVectoringEnv,
    pub base: EpisodeConfig,
    sampler: ScenarioSampler,
}

impl RandomizedTvEnv {
    pub fn new(env: TorqueVectoringEnv, base: EpisodeConfig, scenario_seed: u64) -> Self {
        Self {
            env,
            base,
            sampler: ScenarioSampler::new(scenario_seed),
        }
    }
}

impl Environment for RandomizedTvEnv {
    fn reset(&mut self, episode: usize) -> Result<Vec<f64>> {
        let cfg = self.sampler.sample(&self.base);
        log::trace!(
            "episode {episode}: v0 = {:.1} km/h, mu = {:.3}",
            cfg.initial_speed_kmh,
            cfg.mu
        );
        Ok(self.env.reset(&cfg)?.as_array().to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let mut w = [0.0; Action::DIM];
        w.copy_from_slice(action);
        let out = self.env.step(&Action::new(w))?;
        Ok(EnvStep {
            observation: out.observation.as_array().to_vec(),
            reward: out.reward,
            done: out.done,
        })
    }
}
