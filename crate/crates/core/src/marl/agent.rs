//! MADDPG agents: decentralized actors, centralized critics, target
//! networks, and the critic and actor updates.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::plant::Bounds;

use super::nn::{soft_update, Adam, Mlp, Output};
use super::obs::{agent_bounds, OBS_DIM};

pub const N_AGENTS: usize = 2;
/// Both observations followed by both actions scaled to `[0, 1]`.
pub const CRITIC_DIM: usize = N_AGENTS * OBS_DIM + N_AGENTS;

/// One stored interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: [Vec<f64>; N_AGENTS],
    /// Actions in box units.
    pub action: [f64; N_AGENTS],
    pub reward: f64,
    pub next_obs: [Vec<f64>; N_AGENTS],
}

/// Transitions laid out as row-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub n: usize,
    pub obs: [Vec<f64>; N_AGENTS],
    pub actions: [Vec<f64>; N_AGENTS],
    pub rewards: Vec<f64>,
    pub next_obs: [Vec<f64>; N_AGENTS],
}

impl Batch {
    pub fn new(items: &[&Transition]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let n = items.len();
        let mut b = Batch {
            n,
            obs: std::array::from_fn(|_| Vec::with_capacity(n * OBS_DIM)),
            actions: std::array::from_fn(|_| Vec::with_capacity(n)),
            rewards: Vec::with_capacity(n),
            next_obs: std::array::from_fn(|_| Vec::with_capacity(n * OBS_DIM)),
        };
        for t in items {
            for i in 0..N_AGENTS {
                if t.obs[i].len() != OBS_DIM || t.next_obs[i].len() != OBS_DIM {
                    return Err(Error::Shape { expected: OBS_DIM, actual: t.obs[i].len().min(t.next_obs[i].len()) });
                }
                b.obs[i].extend_from_slice(&t.obs[i]);
                b.next_obs[i].extend_from_slice(&t.next_obs[i]);
                b.actions[i].push(t.action[i]);
            }
            b.rewards.push(t.reward);
        }
        Ok(b)
    }
}

/// Row-major critic input: observations then box-normalized actions.
pub fn critic_input(obs: &[Vec<f64>; N_AGENTS], actions: &[Vec<f64>; N_AGENTS], n: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(n * CRITIC_DIM);
    for j in 0..n {
        for o in obs {
            x.extend_from_slice(&o[j * OBS_DIM..(j + 1) * OBS_DIM]);
        }
        for (i, a) in actions.iter().enumerate() {
            x.push(agent_bounds(i).normalize(a[j]));
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Initial exploration scale as a fraction of the action range.
    pub noise_sigma0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    /// Exploration standard deviation in action units.
    pub noise_sigma: f64,
}

impl Agent {
    pub fn new<R: Rng>(id: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        let b = agent_bounds(id);
        let mut actor_sizes = vec![OBS_DIM];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(1);
        let mut critic_sizes = vec![CRITIC_DIM];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Output::Squash { lo: b.lo, hi: b.hi }, rng)?;
        let critic = Mlp::new(&critic_sizes, Output::Identity, rng)?;
        Ok(Self::from_nets(id, actor, critic, cfg.actor_lr, cfg.critic_lr, cfg.noise_sigma0 * b.span()))
    }

    /// Wraps existing networks; targets start as copies.
    pub fn from_nets(id: usize, actor: Mlp, critic: Mlp, actor_lr: f64, critic_lr: f64, noise_sigma: f64) -> Self {
        Self {
            id,
            actor_opt: Adam::new(actor.params().len(), actor_lr),
            critic_opt: Adam::new(critic.params().len(), critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            noise_sigma,
        }
    }

    pub fn bounds(&self) -> Bounds {
        agent_bounds(self.id)
    }

    /// Deterministic policy output, plus clipped Gaussian noise when exploring.
    pub fn act<R: Rng>(&self, obs: &[f64], explore: bool, rng: &mut R) -> Result<f64> {
        let a = self.actor.predict(obs)?[0];
        let b = self.bounds();
        if !explore || self.noise_sigma <= 0.0 {
            return Ok(b.clip(a));
        }
        let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng);
        Ok(b.clip(a + noise))
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.target_actor, &self.actor, tau)?;
        soft_update(&mut self.target_critic, &self.critic, tau)
    }
}

fn check_finite(v: &[f64], what: &'static str, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { what, step })
    }
}

/// Temporal-difference targets `r + γ·Q′_i(o′, μ′(o′))` for every agent.
pub fn td_targets(batch: &Batch, agents: &[Agent], gamma: f64) -> Result<Vec<Vec<f64>>> {
    if agents.len() != N_AGENTS {
        return Err(Error::Shape { expected: N_AGENTS, actual: agents.len() });
    }
    let n = batch.n;
    let mut next_actions: [Vec<f64>; N_AGENTS] = Default::default();
    for (i, ag) in agents.iter().enumerate() {
        next_actions[i] = ag.target_actor.forward(&batch.next_obs[i], n)?.0;
    }
    let x = critic_input(&batch.next_obs, &next_actions, n);
    agents
        .iter()
        .map(|ag| {
            let (q, _) = ag.target_critic.forward(&x, n)?;
            Ok(batch.rewards.iter().zip(&q).map(|(r, q)| r + gamma * q).collect())
        })
        .collect()
}

/// One Adam step on the critic's mean squared TD error; returns the
/// loss before the step.
pub fn update_critic(agent: &mut Agent, batch: &Batch, targets: &[f64], step: usize) -> Result<f64> {
    let n = batch.n;
    let x = critic_input(&batch.obs, &batch.actions, n);
    let (q, cache) = agent.critic.forward(&x, n)?;
    let loss = q.iter().zip(targets).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / n as f64;
    if !loss.is_finite() {
        return Err(Error::Diverged { what: "critic loss", step });
    }
    let upstream: Vec<f64> = q.iter().zip(targets).map(|(q, y)| 2.0 * (q - y) / n as f64).collect();
    let (grads, _) = agent.critic.backward(&cache, &upstream, false)?;
    check_finite(&grads, "critic gradient", step)?;
    agent.critic_opt.step(&mut agent.critic, &grads)?;
    Ok(loss)
}

/// One deterministic policy-gradient ascent step for `agent`, with the
/// other agents' actions taken from the batch; returns the mean Q before
/// the step.
pub fn update_actor(agent: &mut Agent, batch: &Batch, step: usize) -> Result<f64> {
    let n = batch.n;
    let i = agent.id;
    let (own, actor_cache) = agent.actor.forward(&batch.obs[i], n)?;
    let mut actions = batch.actions.clone();
    actions[i] = own;
    let x = critic_input(&batch.obs, &actions, n);
    let (q, critic_cache) = agent.critic.forward(&x, n)?;
    let mean_q = q.iter().sum::<f64>() / n as f64;
    let upstream = vec![-1.0 / n as f64; n];
    let (_, dx) = agent.critic.backward(&critic_cache, &upstream, true)?;
    let dx = dx.expect("input gradient requested");
    let col = N_AGENTS * OBS_DIM + i;
    let span = agent.bounds().span();
    let da: Vec<f64> = (0..n).map(|j| dx[j * CRITIC_DIM + col] / span).collect();
    let (grads, _) = agent.actor.backward(&actor_cache, &da, false)?;
    check_finite(&grads, "actor gradient", step)?;
    agent.actor_opt.step(&mut agent.actor, &grads)?;
    Ok(mean_q)
}
