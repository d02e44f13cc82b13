//! The interaction and learning loop, and the trained team of agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::impacts::{check_standard, constraint_penalty, reward, NormalizationSample, RewardConfig};
use crate::plant::{Action, PlantState};

use super::agent::{td_targets, update_actor, update_critic, Agent, AgentConfig, Batch, Transition, N_AGENTS};
use super::buffer::ReplayBuffer;
use super::obs::{build_observation, history_at, ObsScale, ObsSlice};
use super::HISTORY_LEN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Initial exploration standard deviation, fraction of each action range.
    pub noise_sigma0: f64,
    /// Relative decay of the exploration scale per epoch.
    pub noise_decay: f64,
    /// Control intervals per epoch.
    pub epoch_steps: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.01,
            batch_size: 256,
            total_steps: 5000,
            buffer_capacity: 1000,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_sigma0: 0.2,
            noise_decay: 0.0002,
            epoch_steps: 24,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("batch_size must be in 1..=buffer_capacity");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be > 0");
        }
        if self.noise_sigma0 < 0.0 || !(0.0..1.0).contains(&self.noise_decay) || self.epoch_steps == 0 {
            return bad("noise_sigma0 >= 0, noise_decay in [0, 1) and epoch_steps > 0 required");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            hidden: self.hidden.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            noise_sigma0: self.noise_sigma0,
        }
    }
}

/// The two agents: index 0 sets dissolved oxygen, index 1 the PAC dose.
#[derive(Debug, Clone, PartialEq)]
pub struct Team {
    pub agents: Vec<Agent>,
}

impl Team {
    pub fn new<R: Rng>(cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        let agents = (0..N_AGENTS).map(|i| Agent::new(i, cfg, rng)).collect::<Result<_>>()?;
        Ok(Self { agents })
    }

    pub fn observe(&self, history: &[ObsSlice], scale: &ObsScale) -> Result<[Vec<f64>; N_AGENTS]> {
        Ok([build_observation(history, 0, scale)?, build_observation(history, 1, scale)?])
    }

    pub fn act<R: Rng>(&self, obs: &[Vec<f64>; N_AGENTS], explore: bool, rng: &mut R) -> Result<Action> {
        Ok(Action::new(self.agents[0].act(&obs[0], explore, rng)?, self.agents[1].act(&obs[1], explore, rng)?))
    }

    /// Greedy joint action.
    pub fn policy(&self, obs: &[Vec<f64>; N_AGENTS]) -> Result<Action> {
        Ok(Action::new(self.agents[0].actor.predict(&obs[0])?[0], self.agents[1].actor.predict(&obs[1])?[0]).clipped())
    }

    /// Critic then actor update for every agent, then soft target updates.
    pub fn learn(&mut self, batch: &Batch, tc: &TrainConfig, step: usize) -> Result<[f64; N_AGENTS]> {
        let targets = td_targets(batch, &self.agents, tc.gamma)?;
        let mut losses = [0.0; N_AGENTS];
        for (i, ag) in self.agents.iter_mut().enumerate() {
            losses[i] = update_critic(ag, batch, &targets[i], step)?;
            update_actor(ag, batch, step)?;
        }
        for ag in &mut self.agents {
            ag.soft_update_targets(tc.tau)?;
        }
        Ok(losses)
    }

    pub fn decay_noise(&mut self, factor: f64) {
        for ag in &mut self.agents {
            ag.noise_sigma *= factor;
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub reward: f64,
    pub r#do: f64,
    pub dose: f64,
    /// Empty until the buffer holds a full batch.
    pub critic_loss_1: Option<f64>,
    pub critic_loss_2: Option<f64>,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "EP")]
    pub ep: f64,
    #[serde(rename = "GHG")]
    pub ghg: f64,
    pub cost: f64,
    pub violation: u8,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub team: Team,
    pub log: Vec<StepLog>,
}

/// Rolling record of the last observation slices.
#[derive(Debug, Clone)]
pub struct History {
    slices: Vec<ObsSlice>,
}

impl History {
    pub fn new(env: &Environment, state: &PlantState, recent: &[Action]) -> Result<Self> {
        if recent.len() != HISTORY_LEN {
            return Err(Error::InvalidArgument(format!("need {HISTORY_LEN} recent actions, got {}", recent.len())));
        }
        Ok(Self { slices: history_at(&env.influent, state.elapsed, recent) })
    }

    pub fn slices(&self) -> &[ObsSlice] {
        &self.slices
    }

    /// Appends the influent arriving at `t` with the action just applied.
    pub fn push(&mut self, env: &Environment, t: f64, applied: Action) {
        self.slices.remove(0);
        self.slices.push(ObsSlice { influent: crate::influent::generate_influent(&env.influent, t), action: applied });
    }

    pub fn last_action(&self) -> Action {
        self.slices[HISTORY_LEN - 1].action
    }
}

/// Runs `tc.total_steps` control intervals of exploration and learning.
pub fn train(
    env: &Environment,
    sample: &NormalizationSample,
    rc: &RewardConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    tc.validate()?;
    rc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut team = Team::new(&tc.agent_config(), &mut rng)?;
    let scale = ObsScale::new(&env.influent);

    let (mut state, recent) = if sample.points.is_empty() {
        (env.initial_state()?, vec![Action::BASELINE; HISTORY_LEN])
    } else {
        let p = &sample.points[rng.random_range(0..sample.points.len())];
        (p.state.clone(), p.recent_actions.clone())
    };
    let mut history = History::new(env, &state, &recent)?;
    let mut obs = team.observe(history.slices(), &scale)?;
    let mut buffer = ReplayBuffer::new(tc.buffer_capacity);
    let mut log = Vec::with_capacity(tc.total_steps);

    for step in 0..tc.total_steps {
        let action = team.act(&obs, true, &mut rng)?;
        let prev = history.last_action();
        let out = env.advance(&state, action)?;
        let penalty = constraint_penalty(&out.effluent, &rc.standard, action, prev, rc);
        let r = reward(&out.impacts, &sample.bounds, penalty, rc)?;
        if !r.is_finite() {
            return Err(Error::Diverged { what: "reward", step });
        }
        state = out.state;
        history.push(env, state.elapsed, action);
        let next_obs = team.observe(history.slices(), &scale)?;
        buffer.push(Transition {
            obs: obs.clone(),
            action: [action.do_setpoint, action.pac_dose],
            reward: r,
            next_obs: next_obs.clone(),
        });
        obs = next_obs;

        let losses = match buffer.sample(tc.batch_size, &mut rng) {
            Some(items) => {
                let batch = Batch::new(&items)?;
                Some(team.learn(&batch, tc, step)?)
            }
            None => None,
        };
        if (step + 1) % tc.epoch_steps == 0 {
            team.decay_noise(1.0 - tc.noise_decay);
        }

        let iv = &out.impacts;
        log.push(StepLog {
            step,
            reward: r,
            r#do: action.do_setpoint,
            dose: action.pac_dose,
            critic_loss_1: losses.map(|l| l[0]),
            critic_loss_2: losses.map(|l| l[1]),
            energy: iv.energy.total,
            ep: iv.ep.total,
            ghg: iv.ghg.total,
            cost: iv.cost.total,
            violation: u8::from(!check_standard(&out.effluent, &rc.standard).passed()),
        });
    }
    Ok(TrainOutcome { team, log })
}

pub fn write_log<W: std::io::Write>(log: &[StepLog], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in log {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Mean of `values[lo..hi]`.
pub fn window_mean(values: &[f64], lo: usize, hi: usize) -> f64 {
    let s = &values[lo.min(values.len())..hi.min(values.len())];
    s.iter().sum::<f64>() / s.len().max(1) as f64
}
