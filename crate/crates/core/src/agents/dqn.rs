use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_discount, greedy_rollout, AgentKind, EpsilonSchedule, TrainReport};
use crate::antenna::BeamDirection;
use crate::env::{BeamActions, Environment};
use crate::error::{Error, Result};
use crate::nn::{max_value, q_regression, sgd_step, Activation, QNetwork, ReplayBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Replay memory capacity `D`.
    pub replay_capacity: usize,
    /// Minibatch size `B`.
    pub batch_size: usize,
    /// Gradient steps between target-network syncs `C`.
    pub target_sync_steps: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    /// Training episodes `K`; one episode is one pass over the rail.
    pub episodes: usize,
}

impl Default for DqnParams {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync_steps: 100,
            learning_rate: 1e-3,
            discount: 0.9,
            epsilon: EpsilonSchedule::default(),
            episodes: 500,
        }
    }
}

impl DqnParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer sizes must be >= 1".into()));
        }
        if self.replay_capacity == 0 || self.batch_size == 0 || self.target_sync_steps == 0 {
            return Err(Error::InvalidConfig(
                "replay_capacity, batch_size and target_sync_steps must be >= 1".into(),
            ));
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::InvalidConfig("batch_size exceeds replay_capacity".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        check_discount(self.discount)?;
        self.epsilon.validate()
    }

    fn layer_sizes(&self, outputs: usize) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(outputs))
            .collect()
    }
}

/// Sixteen absolute receive directions: a 4 x 4 lattice over
/// down-tilt [-1, 0] deg and azimuth [-11, 0] deg. Action `j` sets the beam
/// to entry `j` whatever the previous beam was.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook16 {
    directions: Vec<BeamDirection>,
}

impl Default for Codebook16 {
    fn default() -> Self {
        let thetas = [-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0];
        let phis = [-11.0, -22.0 / 3.0, -11.0 / 3.0, 0.0];
        let directions = thetas
            .iter()
            .flat_map(|&t| phis.iter().map(move |&p| BeamDirection::new(t, p)))
            .collect();
        Self { directions }
    }
}

impl Codebook16 {
    pub fn directions(&self) -> &[BeamDirection] {
        &self.directions
    }
}

impl BeamActions for Codebook16 {
    fn len(&self) -> usize {
        self.directions.len()
    }

    fn apply(&self, _current: BeamDirection, index: usize) -> BeamDirection {
        self.directions[index]
    }
}

/// Deep Q-learning with the nine relative steering moves.
pub fn train_dqn(env: &Environment, params: &DqnParams, seed: u64) -> Result<(QNetwork, TrainReport)> {
    train_dqn_with(env, &env.relative_actions(), AgentKind::Dqn, params, seed)
}

/// Same learner with the sixteen absolute codebook directions as actions.
pub fn train_dqn_codebook16(env: &Environment, params: &DqnParams, seed: u64) -> Result<(QNetwork, TrainReport)> {
    train_dqn_with(env, &Codebook16::default(), AgentKind::Codebook16, params, seed)
}

/// Stored experience. The state is the bin itself; the next state is the
/// following bin.
#[derive(Debug, Clone, Copy)]
struct BinTransition {
    bin: usize,
    action: usize,
    reward: f64,
    terminal: bool,
}

/// `max_a Q_target(bin, a)` for every one-based bin, refreshed at each sync.
/// The state space is the finite set of bins, so caching the target network
/// on it is exact.
fn target_maxima(target: &QNetwork, features: &[f64]) -> Result<Vec<f64>> {
    features.iter().map(|&f| Ok(max_value(&target.forward(&[f])?))).collect()
}

/// Experience-replay Q-learning with a periodically synced target network.
///
/// Each episode rides the rail once: at every bin an epsilon-greedy action is
/// taken, the transition is stored, and once the memory holds a minibatch a
/// gradient step is taken on a uniformly sampled batch. The final policy is
/// the greedy rollout of the trained network.
pub fn train_dqn_with(
    env: &Environment,
    actions: &dyn BeamActions,
    agent: AgentKind,
    params: &DqnParams,
    seed: u64,
) -> Result<(QNetwork, TrainReport)> {
    params.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = QNetwork::new(&params.layer_sizes(actions.len()), params.activation, &mut rng)?;
    // index 0 unused so that features[bin] matches one-based bins
    let features: Vec<f64> = (0..=env.bin_count()).map(|b| env.state_feature(b.max(1))).collect();
    let mut target_max = target_maxima(&net, &features)?;
    let mut memory = ReplayBuffer::new(params.replay_capacity)?;
    let mut updates = 0usize;
    let mut curve = Vec::with_capacity(params.episodes);

    for episode in 0..params.episodes {
        let eps = params.epsilon.at(episode, params.episodes);
        let mut s = env.reset();
        let mut total = 0.0;
        let mut step = 0;
        while !env.is_done(&s) {
            let a = if rng.gen::<f64>() < eps {
                rng.gen_range(0..actions.len())
            } else {
                argmax(&net.forward(&[features[s.bin]])?)
            };
            let out = env.step_to(&s, actions.apply(s.beam, a))?;
            total += out.reward_db;
            memory.push(BinTransition {
                bin: s.bin,
                action: a,
                reward: out.reward_db,
                terminal: out.done,
            });
            if let Some(batch) = memory.sample(&mut rng, params.batch_size) {
                let samples: Vec<(&[f64], usize, f64)> = batch
                    .iter()
                    .map(|t| {
                        let y = if t.terminal {
                            t.reward
                        } else {
                            t.reward + params.discount * target_max[t.bin + 1]
                        };
                        (std::slice::from_ref(&features[t.bin]), t.action, y)
                    })
                    .collect();
                let (loss, grad) = q_regression(&net, &samples)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { episode, step });
                }
                sgd_step(&mut net, &grad, params.learning_rate)?;
                updates += 1;
                if updates.is_multiple_of(params.target_sync_steps) {
                    target_max = target_maxima(&net, &features)?;
                }
            }
            s = out.next_state;
            step += 1;
        }
        curve.push(total / env.bin_count().max(1) as f64);
        log::debug!("{agent} seed {seed} episode {episode}: eps {eps:.3}, mean reward {:.3} dB", curve[episode]);
    }

    let rollout = greedy_rollout(env, actions, &net)?;
    let mut report = TrainReport::new(agent, seed, env, rollout, curve);
    report.wall_clock_s = started.elapsed().as_secs_f64();
    log::info!(
        "{agent} seed {seed}: average reward {:.3} dB after {} episodes ({:.1} s)",
        report.average_reward_db,
        params.episodes,
        report.wall_clock_s
    );
    Ok((net, report))
}
