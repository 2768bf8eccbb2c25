//! Actor-critic updates, exploration and the training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::mlp::{Activation, Adam, ForwardCache, Mlp};
use super::model::ActorModel;
use super::replay::ReplayBuffer;
use super::{Environment, Hyperparams, NetSpec, Transition};
use crate::env::{Action, Observation};
use crate::error::{Error, Result};

/// Scale applied to the actor's final layer at initialisation.
const ACTOR_OUTPUT_INIT_SCALE: f64 = 1e-3;

/// TD target: `r + gamma * q_next`, or `r` alone at termination.
pub fn td_target(reward: f64, done: bool, q_next: f64, gamma: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_next
    }
}

/// Greedy torque-vectoring action of `net`.
pub fn actor_forward(obs: &Observation, net: &Mlp) -> Action {
    let spec = NetSpec::torque_vectoring();
    let out = net.forward(&spec.normalize_obs(&obs.as_array()));
    let mut w = [0.0; Action::DIM];
    for (wi, u) in w.iter_mut().zip(out) {
        *wi = spec.denormalize_action(u);
    }
    Action::new(w)
}

/// Q estimate of the torque-vectoring critic `net`.
pub fn critic_forward(obs: &Observation, action: &Action, net: &Mlp) -> f64 {
    let spec = NetSpec::torque_vectoring();
    net.forward(&spec.critic_input(&obs.as_array(), &action.w_df))[0]
}

/// Mean squared TD error over `batch` and its gradient in the critic's
/// parameters. Targets come from the target networks and are held constant.
pub fn critic_loss_and_grad(
    critic: &Mlp,
    critic_target: &Mlp,
    actor_target: &Mlp,
    spec: &NetSpec,
    batch: &[&Transition],
    gamma: f64,
    reward_scale: f64,
) -> (f64, Mlp) {
    let n = batch.len() as f64;
    let mut grads = critic.zeros_like();
    let mut cache = ForwardCache::default();
    let mut loss = 0.0;
    for t in batch {
        let y = if t.done {
            reward_scale * t.reward
        } else {
            let next = spec.normalize_obs(&t.next_obs);
            let mut x = next.clone();
            x.extend(actor_target.forward(&next));
            let q_next = critic_target.forward(&x)[0];
            td_target(reward_scale * t.reward, false, q_next, gamma)
        };
        let q = critic.forward_cached(&spec.critic_input(&t.obs, &t.action), &mut cache)[0];
        let diff = q - y;
        loss += diff * diff / n;
        critic.backward(&cache, &[2.0 * diff / n], Some(&mut grads));
    }
    (loss, grads)
}

/// Mean of `Q(s, pi(s))` over `batch` and its gradient in the actor's parameters.
pub fn actor_objective_and_grad(
    actor: &Mlp,
    critic: &Mlp,
    spec: &NetSpec,
    batch: &[&Transition],
) -> (f64, Mlp) {
    let obs_dim = spec.obs_dim();
    let mut cache = ForwardCache::default();
    actor_objective_and_grad_with(actor, spec, batch, |s, u| {
        let mut x = s.to_vec();
        x.extend_from_slice(u);
        let q = critic.forward_cached(&x, &mut cache)[0];
        let dx = critic.backward(&cache, &[1.0], None);
        (q, dx[obs_dim..].to_vec())
    })
}

/// Same as [`actor_objective_and_grad`] for any differentiable critic.
/// `q(s, u)` receives the normalized observation and normalized action and
/// returns the value together with its gradient in `u`.
pub fn actor_objective_and_grad_with<F>(
    actor: &Mlp,
    spec: &NetSpec,
    batch: &[&Transition],
    mut q: F,
) -> (f64, Mlp)
where
    F: FnMut(&[f64], &[f64]) -> (f64, Vec<f64>),
{
    let n = batch.len() as f64;
    let mut grads = actor.zeros_like();
    let mut cache = ForwardCache::default();
    let mut objective = 0.0;
    for t in batch {
        let s = spec.normalize_obs(&t.obs);
        // The tanh output is already the action normalized to [-1, 1].
        let u = actor.forward_cached(&s, &mut cache).to_vec();
        let (value, du) = q(&s, &u);
        objective += value / n;
        let du: Vec<f64> = du.iter().map(|g| g / n).collect();
        actor.backward(&cache, &du, Some(&mut grads));
    }
    (objective, grads)
}

/// Standard deviation of the exploration noise at agent step `k`.
pub fn exploration_std(k: u64, hp: &Hyperparams) -> f64 {
    (hp.noise_variance * (1.0 - hp.variance_decay).powf(k as f64)).sqrt()
}

/// Adds decaying Gaussian noise to every component, then clamps to the bounds.
pub fn explore<R: Rng + ?Sized>(action: &Action, k: u64, hp: &Hyperparams, rng: &mut R) -> Action {
    let sigma = exploration_std(k, hp);
    let mut w = action.w_df;
    for wi in &mut w {
        let z: f64 = rng.sample(StandardNormal);
        *wi += sigma * z;
    }
    Action::new(w).clamped()
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub hp: Hyperparams,
    pub spec: NetSpec,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    rng: ChaCha8Rng,
    steps: u64,
}

impl DdpgAgent {
    pub fn new(spec: NetSpec, hp: Hyperparams, seed: u64) -> Result<Self> {
        spec.validate()?;
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [h1, h2] = hp.hidden;
        let mut actor = Mlp::random(
            &[spec.obs_dim(), h1, h2, spec.action_dim],
            Activation::Relu,
            Activation::Tanh,
            &mut rng,
        );
        actor.scale_output_layer(ACTOR_OUTPUT_INIT_SCALE);
        let critic = Mlp::random(
            &[spec.obs_dim() + spec.action_dim, h1, h2, 1],
            Activation::Relu,
            Activation::Linear,
            &mut rng,
        );
        Ok(Self {
            actor_opt: Adam::new(actor.param_count(), hp.actor_lr),
            critic_opt: Adam::new(critic.param_count(), hp.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            hp,
            spec,
            rng,
            steps: 0,
        })
    }

    /// Agent steps taken so far; drives the noise decay.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.actor
            .forward(&self.spec.normalize_obs(obs))
            .into_iter()
            .map(|u| self.spec.denormalize_action(u))
            .collect()
    }

    /// Greedy action plus exploration noise; advances the noise schedule.
    pub fn act_exploring(&mut self, obs: &[f64]) -> Vec<f64> {
        let sigma = exploration_std(self.steps, &self.hp);
        self.steps += 1;
        let (lo, hi) = (self.spec.action_low, self.spec.action_high);
        self.act(obs)
            .into_iter()
            .map(|a| {
                let z: f64 = self.rng.sample(StandardNormal);
                (a + sigma * z).clamp(lo, hi)
            })
            .collect()
    }

    /// One critic step; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> f64 {
        let (loss, grads) = critic_loss_and_grad(
            &self.critic,
            &self.critic_target,
            &self.actor_target,
            &self.spec,
            batch,
            self.hp.gamma,
            self.hp.reward_scale,
        );
        self.critic_opt
            .step(self.critic.params_mut(), grads.params());
        loss
    }

    /// One ascent step of the actor on the batch mean of `Q(s, pi(s))`;
    /// returns the objective before the step.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> f64 {
        let (objective, mut grads) =
            actor_objective_and_grad(&self.actor, &self.critic, &self.spec, batch);
        for g in grads.params_mut() {
            *g = -*g;
        }
        self.actor_opt.step(self.actor.params_mut(), grads.params());
        objective
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.actor_target
            .soft_update_from(&self.actor, self.hp.tau)?;
        self.critic_target
            .soft_update_from(&self.critic, self.hp.tau)
    }

    /// Minibatch draw using the agent's own generator.
    pub fn sample<'b>(&mut self, buffer: &'b ReplayBuffer) -> Vec<&'b Transition> {
        buffer.sample(self.hp.minibatch, &mut self.rng)
    }

    pub fn model(&self) -> ActorModel {
        ActorModel {
            spec: self.spec.clone(),
            net: self.actor.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Greedy actor after the last episode.
    pub actor: ActorModel,
    /// Undiscounted reward of every episode.
    pub rewards: Vec<f64>,
    pub last_critic_loss: f64,
}

/// Runs `hp.episodes` training episodes on `env`.
pub fn train<E: Environment>(
    env: &mut E,
    spec: NetSpec,
    hp: &Hyperparams,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut agent = DdpgAgent::new(spec, hp.clone(), seed)?;
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut rewards = Vec::with_capacity(hp.episodes);
    let mut last_loss = f64::NAN;
    for episode in 0..hp.episodes {
        let mut obs = env.reset(episode)?;
        let mut total = 0.0;
        loop {
            let action = agent.act_exploring(&obs);
            let out = env.step(&action)?;
            total += out.reward;
            let t = Transition {
                obs,
                action,
                reward: out.reward,
                next_obs: out.observation.clone(),
                done: out.done,
            };
            if !t.is_finite() {
                return Err(Error::TrainingAbort(format!(
                    "non-finite transition in episode {episode}: {t:?}"
                )));
            }
            buffer.push(t);
            if buffer.len() >= hp.minibatch {
                let batch = agent.sample(&buffer);
                let loss = agent.critic_update(&batch);
                let objective = agent.actor_update(&batch);
                if !loss.is_finite() || !objective.is_finite() {
                    return Err(Error::TrainingAbort(format!(
                        "episode {episode}, step {}: critic loss {loss}, actor objective {objective}",
                        agent.steps()
                    )));
                }
                agent.soft_update_targets()?;
                last_loss = loss;
            }
            obs = out.observation;
            if out.done {
                break;
            }
        }
        if !agent.actor.is_finite() || !agent.critic.is_finite() {
            return Err(Error::TrainingAbort(format!(
                "network parameters diverged in episode {episode}"
            )));
        }
        log::debug!("episode {episode}: reward {total:.6e}, critic loss {last_loss:.3e}");
        if (episode + 1) % 50 == 0 {
            let tail = &rewards[rewards.len().saturating_sub(49)..];
            let mean = (tail.iter().sum::<f64>() + total) / (tail.len() + 1) as f64;
            log::info!(
                "episode {}: mean reward over last 50 = {mean:.6e}",
                episode + 1
            );
        }
        rewards.push(total);
    }
    Ok(TrainOutcome {
        actor: agent.model(),
        rewards,
        last_critic_loss: last_loss,
    })
}
