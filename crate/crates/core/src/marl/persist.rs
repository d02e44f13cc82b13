//! Versioned JSON form of a trained team.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impacts::RewardConfig;

use super::agent::{Agent, N_AGENTS};
use super::nn::{Mlp, Output};
use super::train::{Team, TrainConfig};

pub const FORMAT: &str = "wwtp-marl-agents";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows × cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDocument {
    pub sizes: Vec<usize>,
    pub output: Output,
    pub layers: Vec<LayerDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDocument {
    pub control: String,
    pub actor: NetDocument,
    pub critic: NetDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamDocument {
    pub format: String,
    pub version: u32,
    pub agents: Vec<AgentDocument>,
    pub train_config: TrainConfig,
    pub reward_config: RewardConfig,
}

const CONTROLS: [&str; N_AGENTS] = ["do_setpoint", "pac_dose"];

impl NetDocument {
    pub fn from_net(net: &Mlp) -> Self {
        let sizes = net.sizes().to_vec();
        let layers = (0..sizes.len() - 1)
            .map(|l| {
                let (w, b) = net.layer(l);
                LayerDocument { rows: sizes[l + 1], cols: sizes[l], weights: w.to_vec(), bias: b.to_vec() }
            })
            .collect();
        Self { sizes, output: net.output(), layers }
    }

    pub fn to_net(&self) -> Result<Mlp> {
        if self.layers.len() + 1 != self.sizes.len() {
            return Err(Error::Shape { expected: self.sizes.len().saturating_sub(1), actual: self.layers.len() });
        }
        let mut params = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            if layer.rows != o || layer.cols != i || layer.weights.len() != o * i || layer.bias.len() != o {
                return Err(Error::Shape { expected: o * i, actual: layer.weights.len() });
            }
            params.extend(&layer.weights);
            params.extend(&layer.bias);
        }
        Mlp::from_params(&self.sizes, params, self.output)
    }
}

impl TeamDocument {
    pub fn new(team: &Team, tc: &TrainConfig, rc: &RewardConfig) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            agents: team
                .agents
                .iter()
                .map(|a| AgentDocument {
                    control: CONTROLS[a.id].into(),
                    actor: NetDocument::from_net(&a.actor),
                    critic: NetDocument::from_net(&a.critic),
                })
                .collect(),
            train_config: tc.clone(),
            reward_config: rc.clone(),
        }
    }

    /// Rebuilds the team; targets start as copies and exploration is off.
    pub fn to_team(&self) -> Result<Team> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Config(format!("unsupported agent document {} v{}", self.format, self.version)));
        }
        if self.agents.len() != N_AGENTS {
            return Err(Error::Shape { expected: N_AGENTS, actual: self.agents.len() });
        }
        let tc = &self.train_config;
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, d)| {
                Ok(Agent::from_nets(i, d.actor.to_net()?, d.critic.to_net()?, tc.actor_lr, tc.critic_lr, 0.0))
            })
            .collect::<Result<_>>()?;
        Ok(Team { agents })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
