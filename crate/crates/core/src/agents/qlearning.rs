use std::io::{BufRead, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_discount, greedy_rollout, AgentKind, EpsilonSchedule, QFunction, TrainReport};
use crate::env::{BeamActions, Environment};
use crate::error::{Error, Result};
use crate::nn::{join_floats, NumberedLines, WeightMeta};

pub const QTABLE_FILE_MAGIC: &str = "RAILBEAM-QTABLE";
pub const QTABLE_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    pub episodes: usize,
}

impl Default for QLearningParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.9,
            epsilon: EpsilonSchedule::default(),
            episodes: 500,
        }
    }
}

impl QLearningParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::InvalidConfig("q-learning learning_rate must lie in [0, 1]".into()));
        }
        check_discount(self.discount)?;
        self.epsilon.validate()
    }
}

/// Action values indexed by (one-based bin, action), zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    bins: usize,
    actions: usize,
    values: Vec<f64>,
    pub learning_rate: f64,
    pub discount: f64,
}

impl QTable {
    pub fn new(bins: usize, actions: usize, learning_rate: f64, discount: f64) -> Self {
        Self {
            bins,
            actions,
            values: vec![0.0; bins * actions],
            learning_rate,
            discount,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        let i = (bin - 1) * self.actions;
        &self.values[i..i + self.actions]
    }

    pub fn get(&self, bin: usize, action: usize) -> f64 {
        self.row(bin)[action]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Q(s,a) += lr * (r + discount * max_a' Q(s',a') - Q(s,a))`;
    /// `next_bin = None` marks a terminal transition.
    pub fn update(&mut self, bin: usize, action: usize, reward: f64, next_bin: Option<usize>) {
        let future = next_bin
            .map(|b| self.row(b).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(0.0);
        let i = (bin - 1) * self.actions + action;
        let td = reward + self.discount * future - self.values[i];
        self.values[i] += self.learning_rate * td;
    }

    /// Text table: header lines, then one row of action values per bin.
    pub fn save<W: Write>(&self, mut w: W, meta: &WeightMeta) -> Result<()> {
        writeln!(w, "{QTABLE_FILE_MAGIC} {QTABLE_FILE_VERSION}")?;
        writeln!(w, "config_hash {}", meta.config_hash)?;
        writeln!(w, "seed {}", meta.seed)?;
        writeln!(w, "agent {}", meta.agent)?;
        writeln!(w, "learning_rate {:e}", self.learning_rate)?;
        writeln!(w, "discount {:e}", self.discount)?;
        writeln!(w, "shape {} {}", self.bins, self.actions)?;
        for row in self.values.chunks_exact(self.actions) {
            writeln!(w, "{}", join_floats(row))?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<(Self, WeightMeta)> {
        let mut lines = NumberedLines::new(r, "q-table");
        let header = lines.next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(QTABLE_FILE_MAGIC) {
            return Err(lines.error("missing q-table magic"));
        }
        let version = parts.next().unwrap_or("");
        if version != QTABLE_FILE_VERSION.to_string() {
            return Err(Error::Version {
                kind: "q-table",
                found: version.to_string(),
                expected: QTABLE_FILE_VERSION,
            });
        }
        let config_hash = lines.keyed("config_hash")?;
        let seed = lines
            .keyed("seed")?
            .parse()
            .map_err(|_| lines.error("seed is not an integer"))?;
        let agent = lines.keyed("agent")?;
        let learning_rate = lines
            .keyed("learning_rate")?
            .parse()
            .map_err(|_| lines.error("bad learning_rate"))?;
        let discount = lines
            .keyed("discount")?
            .parse()
            .map_err(|_| lines.error("bad discount"))?;
        let shape: Vec<usize> = lines
            .keyed("shape")?
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| lines.error("bad shape"))?;
        let [bins, actions] = shape[..] else {
            return Err(lines.error("shape needs two values"));
        };
        let mut table = QTable::new(bins, actions, learning_rate, discount);
        let mut values = Vec::with_capacity(bins * actions);
        for _ in 0..bins {
            values.extend(lines.floats(actions)?);
        }
        table.values = values;
        lines.expect("end")?;
        Ok((
            table,
            WeightMeta {
                config_hash,
                seed,
                agent,
            },
        ))
    }
}

impl QFunction for QTable {
    fn q_values(&self, _env: &Environment, bin: usize) -> Result<Vec<f64>> {
        if bin == 0 || bin > self.bins {
            return Err(Error::BinOutOfRange {
                index: bin,
                count: self.bins,
            });
        }
        Ok(self.row(bin).to_vec())
    }
}

/// Tabular Q-learning with the nine relative steering moves.
pub fn train_qlearning(env: &Environment, params: &QLearningParams, seed: u64) -> Result<(QTable, TrainReport)> {
    train_qlearning_with(env, &env.relative_actions(), params, seed)
}

/// Tabular Q-learning over any action set, with the same exploration
/// schedule as the deep learner.
pub fn train_qlearning_with(
    env: &Environment,
    actions: &dyn BeamActions,
    params: &QLearningParams,
    seed: u64,
) -> Result<(QTable, TrainReport)> {
    params.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = QTable::new(env.bin_count(), actions.len(), params.learning_rate, params.discount);
    let mut curve = Vec::with_capacity(params.episodes);
    for episode in 0..params.episodes {
        let eps = params.epsilon.at(episode, params.episodes);
        let mut s = env.reset();
        let mut total = 0.0;
        while !env.is_done(&s) {
            let a = if rng.gen::<f64>() < eps {
                rng.gen_range(0..actions.len())
            } else {
                argmax(table.row(s.bin))
            };
            let out = env.step_to(&s, actions.apply(s.beam, a))?;
            total += out.reward_db;
            table.update(s.bin, a, out.reward_db, (!out.done).then_some(out.next_state.bin));
            s = out.next_state;
        }
        curve.push(total / env.bin_count().max(1) as f64);
    }
    let rollout = greedy_rollout(env, actions, &table)?;
    let mut report = TrainReport::new(AgentKind::QLearning, seed, env, rollout, curve);
    report.wall_clock_s = started.elapsed().as_secs_f64();
    log::info!(
        "qlearning seed {seed}: average reward {:.3} dB after {} episodes",
        report.average_reward_db,
        params.episodes
    );
    Ok((table, report))
}
