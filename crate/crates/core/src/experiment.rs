//! Runs agents from an [`ExperimentConfig`]; shared by the command line and
//! the integration tests.

use std::io::BufRead;

use crate::agents::{
    greedy_rollout, run_fba, run_gamma_greedy, train_dqn, train_dqn_codebook16, train_qlearning, AgentKind,
    Codebook16, QFunction, QTable, TrainReport,
};
use crate::beamdb::{build_database, BeamDatabase};
use crate::config::ExperimentConfig;
use crate::env::{BeamActions, Environment};
use crate::error::{Error, Result};
use crate::nn::{QNetwork, WeightMeta};

/// Learned state of an agent, if it has any.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Network(QNetwork),
    Table(QTable),
    None,
}

impl TrainedModel {
    pub fn as_q(&self) -> Option<&dyn QFunction> {
        match self {
            TrainedModel::Network(n) => Some(n),
            TrainedModel::Table(t) => Some(t),
            TrainedModel::None => None,
        }
    }

    /// File extension used for the persisted model.
    pub fn extension(agent: AgentKind) -> Option<&'static str> {
        match agent {
            AgentKind::Dqn | AgentKind::Codebook16 => Some("weights"),
            AgentKind::QLearning => Some("qtable"),
            AgentKind::GammaGreedy | AgentKind::Fba => None,
        }
    }

    pub fn save<W: std::io::Write>(&self, w: W, meta: &WeightMeta) -> Result<()> {
        match self {
            TrainedModel::Network(n) => n.save(w, meta),
            TrainedModel::Table(t) => t.save(w, meta),
            TrainedModel::None => Ok(()),
        }
    }

    pub fn load<R: BufRead>(agent: AgentKind, r: R) -> Result<(Self, WeightMeta)> {
        match agent {
            AgentKind::Dqn | AgentKind::Codebook16 => {
                QNetwork::load(r).map(|(n, m)| (TrainedModel::Network(n), m))
            }
            AgentKind::QLearning => QTable::load(r).map(|(t, m)| (TrainedModel::Table(t), m)),
            _ => Err(Error::InvalidConfig(format!("agent {agent} has no persisted model"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentRun {
    pub report: TrainReport,
    pub model: TrainedModel,
}

/// Action set an agent steers with.
pub fn actions_for(agent: AgentKind, env: &Environment) -> Box<dyn BeamActions> {
    match agent {
        AgentKind::Codebook16 => Box::new(Codebook16::default()),
        _ => Box::new(env.relative_actions()),
    }
}

/// Environment an agent runs in: the greedy tracker uses its own finer bins.
pub fn environment_for(cfg: &ExperimentConfig, agent: AgentKind) -> Result<Environment> {
    match agent {
        AgentKind::GammaGreedy => cfg.gamma_environment(),
        _ => cfg.environment(),
    }
}

/// Trains (or simply runs) one agent with one seed.
pub fn run_agent(cfg: &ExperimentConfig, agent: AgentKind, seed: u64) -> Result<AgentRun> {
    let env = environment_for(cfg, agent)?;
    let (mut report, model) = match agent {
        AgentKind::Dqn => {
            let (n, r) = train_dqn(&env, &cfg.dqn, seed)?;
            (r, TrainedModel::Network(n))
        }
        AgentKind::Codebook16 => {
            let (n, r) = train_dqn_codebook16(&env, &cfg.dqn, seed)?;
            (r, TrainedModel::Network(n))
        }
        AgentKind::QLearning => {
            let (t, r) = train_qlearning(&env, &cfg.qlearning, seed)?;
            (r, TrainedModel::Table(t))
        }
        AgentKind::GammaGreedy => (run_gamma_greedy(&env)?, TrainedModel::None),
        AgentKind::Fba => (run_fba(&env)?, TrainedModel::None),
    };
    report.seed = if agent.is_learned() { seed } else { report.seed };
    report.config_hash = cfg.config_hash();
    Ok(AgentRun { report, model })
}

/// Greedy rollout of a trained model.
pub fn evaluate(cfg: &ExperimentConfig, agent: AgentKind, model: &TrainedModel, seed: u64) -> Result<TrainReport> {
    let q = model
        .as_q()
        .ok_or_else(|| Error::InvalidConfig(format!("agent {agent} has no model to evaluate")))?;
    let env = environment_for(cfg, agent)?;
    let actions = actions_for(agent, &env);
    let rollout = greedy_rollout(&env, actions.as_ref(), q)?;
    let mut report = TrainReport::new(agent, seed, &env, rollout, Vec::new());
    report.config_hash = cfg.config_hash();
    Ok(report)
}

/// Candidate database from a trained model with the configured size.
pub fn database_for(cfg: &ExperimentConfig, agent: AgentKind, model: &TrainedModel) -> Result<BeamDatabase> {
    let q = model
        .as_q()
        .ok_or_else(|| Error::InvalidConfig(format!("agent {agent} has no model to build a database from")))?;
    let env = environment_for(cfg, agent)?;
    let actions = actions_for(agent, &env);
    build_database(
        &env,
        actions.as_ref(),
        q,
        cfg.database.candidates,
        cfg.database.utilization_prob,
    )
}
