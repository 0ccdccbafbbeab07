//! Beam-steering policies: deep Q-learning, tabular Q-learning, the greedy
//! tracker, the fixed beam and the 16-direction codebook learner.

mod baselines;
mod dqn;
mod qlearning;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::antenna::BeamDirection;
use crate::env::{BeamActions, Environment};
use crate::error::{Error, Result};
use crate::nn::QNetwork;

pub use baselines::{run_fba, run_gamma_greedy};
pub use dqn::{train_dqn, train_dqn_codebook16, train_dqn_with, Codebook16, DqnParams};
pub use qlearning::{train_qlearning, train_qlearning_with, QLearningParams, QTable};

/// Linear exploration schedule over the first part of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Fraction of episodes over which epsilon decays; constant afterwards.
    pub anneal_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            anneal_fraction: 0.6,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.start) || !unit(self.end) || !unit(self.anneal_fraction) {
            return Err(Error::InvalidConfig(
                "epsilon start/end/anneal_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Epsilon for zero-based `episode` out of `episodes`.
    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        let span = self.anneal_fraction * episodes as f64;
        if span <= 0.0 {
            return self.end;
        }
        let t = episode as f64 / span;
        if t >= 1.0 {
            self.end
        } else {
            self.start + (self.end - self.start) * t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "dqn")]
    Dqn,
    #[serde(rename = "qlearning")]
    QLearning,
    #[serde(rename = "gamma-greedy")]
    GammaGreedy,
    #[serde(rename = "fba")]
    Fba,
    #[serde(rename = "codebook16")]
    Codebook16,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::Dqn,
        AgentKind::QLearning,
        AgentKind::GammaGreedy,
        AgentKind::Fba,
        AgentKind::Codebook16,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::QLearning => "qlearning",
            AgentKind::GammaGreedy => "gamma-greedy",
            AgentKind::Fba => "fba",
            AgentKind::Codebook16 => "codebook16",
        }
    }

    /// Whether the agent learns (and therefore depends on the seed).
    pub fn is_learned(self) -> bool {
        matches!(self, AgentKind::Dqn | AgentKind::QLearning | AgentKind::Codebook16)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown agent `{s}` (expected one of dqn, qlearning, gamma-greedy, fba, codebook16)"
                ))
            })
    }
}

/// Action values at a one-based bin.
pub trait QFunction {
    fn q_values(&self, env: &Environment, bin: usize) -> Result<Vec<f64>>;
}

impl QFunction for QNetwork {
    fn q_values(&self, env: &Environment, bin: usize) -> Result<Vec<f64>> {
        self.forward(&[env.state_feature(bin)])
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Beams, actions and measured power of one pass over the rail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub beams: Vec<BeamDirection>,
    /// Zero-based action index per bin (empty for non-learning policies).
    pub actions: Vec<usize>,
    pub rsp_dbm: Vec<f64>,
}

impl Rollout {
    /// Measures a fixed per-bin beam sequence.
    pub fn from_beams(env: &Environment, beams: Vec<BeamDirection>) -> Result<Self> {
        if beams.len() != env.bin_count() {
            return Err(Error::LengthMismatch {
                expected: env.bin_count(),
                got: beams.len(),
            });
        }
        let rsp_dbm = beams.iter().enumerate().map(|(i, b)| env.rsp_dbm(i, *b)).collect();
        Ok(Self {
            beams,
            actions: Vec::new(),
            rsp_dbm,
        })
    }
}

/// Follows the argmax of `q` from the reset state to the end of the rail.
pub fn greedy_rollout(env: &Environment, actions: &dyn BeamActions, q: &dyn QFunction) -> Result<Rollout> {
    let n = env.bin_count();
    let mut out = Rollout {
        beams: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        rsp_dbm: Vec::with_capacity(n),
    };
    let mut s = env.reset();
    while !env.is_done(&s) {
        let qs = q.q_values(env, s.bin)?;
        if qs.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                expected: actions.len(),
                got: qs.len(),
            });
        }
        let a = argmax(&qs);
        let step = env.step_to(&s, actions.apply(s.beam, a))?;
        out.beams.push(step.next_state.beam);
        out.actions.push(a);
        out.rsp_dbm.push(step.rsp_dbm);
        s = step.next_state;
    }
    Ok(out)
}

/// Outcome of training (or running) one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub agent: AgentKind,
    pub seed: u64,
    /// Filled in by the caller that knows the resolved configuration.
    pub config_hash: String,
    pub episodes: usize,
    /// Mean per-step reward of every training episode, dB.
    pub episode_mean_reward_db: Vec<f64>,
    pub positions_m: Vec<f64>,
    pub policy: Vec<BeamDirection>,
    pub actions: Vec<usize>,
    pub rsp_dbm: Vec<f64>,
    pub benchmark_rsp_dbm: Vec<f64>,
    /// Mean over bins of policy power minus benchmark power, dB.
    pub average_reward_db: f64,
    /// Excluded from serialisation so reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl TrainReport {
    pub fn new(agent: AgentKind, seed: u64, env: &Environment, rollout: Rollout, episode_mean_reward_db: Vec<f64>) -> Self {
        let benchmark_rsp_dbm: Vec<f64> = (0..env.bin_count()).map(|i| env.benchmark_rsp_dbm(i)).collect();
        let average_reward_db = mean_gap(&rollout.rsp_dbm, &benchmark_rsp_dbm);
        Self {
            agent,
            seed,
            config_hash: String::new(),
            episodes: episode_mean_reward_db.len(),
            episode_mean_reward_db,
            positions_m: env.positions_m().to_vec(),
            policy: rollout.beams,
            actions: rollout.actions,
            rsp_dbm: rollout.rsp_dbm,
            benchmark_rsp_dbm,
            average_reward_db,
            wall_clock_s: 0.0,
        }
    }

    pub fn rewards_db(&self) -> Vec<f64> {
        self.rsp_dbm
            .iter()
            .zip(&self.benchmark_rsp_dbm)
            .map(|(p, b)| p - b)
            .collect()
    }
}

pub(crate) fn mean_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64
}

pub(crate) fn check_discount(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("discount must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}
