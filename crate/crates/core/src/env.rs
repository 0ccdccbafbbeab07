//! Episodic beam-steering environment.
//!
//! The agent observes only its location bin. Each step applies one action to
//! the receive beam, measures the power at the current bin and rewards the gap
//! to the fixed benchmark beam; the episode ends after the last bin.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::antenna::{BeamDirection, SteeringBox};
use crate::error::{Error, Result};
use crate::geometry::ScenarioConfig;
use crate::link::{LinkTable, Panels};

/// Source of per-bin received power for a receive beam.
pub trait RspModel: Send + Sync {
    fn positions_m(&self) -> &[f64];
    fn rsp_dbm(&self, bin: usize, beam: BeamDirection) -> f64;
}

impl RspModel for LinkTable {
    fn positions_m(&self) -> &[f64] {
        LinkTable::positions_m(self)
    }

    fn rsp_dbm(&self, bin: usize, beam: BeamDirection) -> f64 {
        LinkTable::rsp_dbm(self, bin, beam)
    }
}

/// Received power given by a function of (zero-based bin, beam); handy for
/// synthetic channels.
pub struct FnModel<F> {
    pub positions: Vec<f64>,
    pub f: F,
}

impl<F> RspModel for FnModel<F>
where
    F: Fn(usize, BeamDirection) -> f64 + Send + Sync,
{
    fn positions_m(&self) -> &[f64] {
        &self.positions
    }

    fn rsp_dbm(&self, bin: usize, beam: BeamDirection) -> f64 {
        (self.f)(bin, beam)
    }
}

/// Relative steering action. `a1` keeps the beam; the others move it by one
/// step in down-tilt and/or azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action(u8);

pub const ACTION_COUNT: usize = 9;

// (d_theta, d_phi) in units of the step size, rows a1..a9
const ACTION_TABLE: [(i8, i8); ACTION_COUNT] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (1, 1),
    (0, -1),
    (-1, 0),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

impl Action {
    /// Action from its one-based id (`1` is `a1`).
    pub fn from_id(id: usize) -> Option<Self> {
        (1..=ACTION_COUNT).contains(&id).then(|| Self((id - 1) as u8))
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::from_id(index + 1)
    }

    pub fn id(self) -> usize {
        self.0 as usize + 1
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..ACTION_COUNT as u8).map(Action)
    }

    /// `(d_theta, d_phi)` in degrees for step size `step_deg`.
    pub fn delta(self, step_deg: f64) -> (f64, f64) {
        let (t, p) = ACTION_TABLE[self.index()];
        (t as f64 * step_deg, p as f64 * step_deg)
    }
}

/// A finite action set acting on the receive beam.
pub trait BeamActions: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Beam after taking action `index` from `current`.
    fn apply(&self, current: BeamDirection, index: usize) -> BeamDirection;
}

/// The nine relative moves, clamped to the steering box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeActions {
    pub step_deg: f64,
    pub steering: SteeringBox,
}

impl BeamActions for RelativeActions {
    fn len(&self) -> usize {
        ACTION_COUNT
    }

    fn apply(&self, current: BeamDirection, index: usize) -> BeamDirection {
        let (dt, dp) = Action(index as u8).delta(self.step_deg);
        self.steering.clamp(BeamDirection::new(
            current.theta_deg + dt,
            current.phi_deg + dp,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Step size of one relative move, degrees.
    pub beam_step_deg: f64,
    /// Fixed benchmark receive beam the reward is measured against.
    pub benchmark: BeamDirection,
    /// RRH transmit beam, held fixed.
    pub tx_beam: BeamDirection,
    pub steering: SteeringBox,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            beam_step_deg: 3.0,
            benchmark: BeamDirection::ZERO,
            tx_beam: BeamDirection::ZERO,
            steering: SteeringBox::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beam_step_deg > 0.0) {
            return Err(Error::InvalidConfig("beam_step_deg must be > 0".into()));
        }
        self.steering.validate()?;
        if !self.steering.contains(self.benchmark) {
            return Err(Error::InvalidConfig("benchmark beam lies outside the steering box".into()));
        }
        Ok(())
    }

    pub fn relative_actions(&self) -> RelativeActions {
        RelativeActions {
            step_deg: self.beam_step_deg,
            steering: self.steering,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// One-based bin about to be entered; `bin_count + 1` once finished.
    pub bin: usize,
    /// Receive beam left by the previous step.
    pub beam: BeamDirection,
    pub benchmark: BeamDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward_db: f64,
    pub next_state: EnvState,
    pub rsp_dbm: f64,
    pub done: bool,
}

/// Immutable environment; episodes are threaded through [`EnvState`] values.
#[derive(Clone)]
pub struct Environment {
    model: Arc<dyn RspModel>,
    benchmark_rsp: Vec<f64>,
    cfg: EnvConfig,
}

impl Environment {
    /// Builds the link-budget environment for a scenario.
    pub fn new(scenario: &ScenarioConfig, panels: &Panels, cfg: EnvConfig) -> Result<Self> {
        scenario.validate()?;
        cfg.validate()?;
        let table = LinkTable::new(scenario, panels, cfg.tx_beam)?;
        Ok(Self::with_model(Arc::new(table), cfg))
    }

    /// Wraps any received-power model.
    pub fn with_model(model: Arc<dyn RspModel>, cfg: EnvConfig) -> Self {
        let benchmark_rsp = (0..model.positions_m().len())
            .map(|i| model.rsp_dbm(i, cfg.benchmark))
            .collect();
        Self {
            model,
            benchmark_rsp,
            cfg,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn bin_count(&self) -> usize {
        self.benchmark_rsp.len()
    }

    pub fn positions_m(&self) -> &[f64] {
        self.model.positions_m()
    }

    pub fn relative_actions(&self) -> RelativeActions {
        self.cfg.relative_actions()
    }

    /// Start of an episode: first bin, beam at the origin.
    pub fn reset(&self) -> EnvState {
        EnvState {
            bin: 1,
            beam: BeamDirection::ZERO,
            benchmark: self.cfg.benchmark,
        }
    }

    pub fn is_done(&self, s: &EnvState) -> bool {
        s.bin > self.bin_count()
    }

    /// Received power at zero-based bin `i`.
    pub fn rsp_dbm(&self, i: usize, beam: BeamDirection) -> f64 {
        self.model.rsp_dbm(i, beam)
    }

    /// Received power of the benchmark beam at zero-based bin `i`.
    pub fn benchmark_rsp_dbm(&self, i: usize) -> f64 {
        self.benchmark_rsp[i]
    }

    /// Reward of holding `beam` at zero-based bin `i`.
    pub fn reward(&self, i: usize, beam: BeamDirection) -> f64 {
        self.model.rsp_dbm(i, beam) - self.benchmark_rsp[i]
    }

    /// Position normalised to [0, 1] for one-based bin `bin`.
    pub fn state_feature(&self, bin: usize) -> f64 {
        let n = self.bin_count();
        if n <= 1 {
            0.0
        } else {
            (bin.min(n) - 1) as f64 / (n - 1) as f64
        }
    }

    /// Applies a relative action from the action table.
    pub fn step(&self, s: &EnvState, a: Action) -> Result<StepOutcome> {
        let beam = self.relative_actions().apply(s.beam, a.index());
        self.step_to(s, beam)
    }

    /// Sets the receive beam directly (clamped) and advances one bin.
    pub fn step_to(&self, s: &EnvState, beam: BeamDirection) -> Result<StepOutcome> {
        if self.is_done(s) || s.bin == 0 {
            return Err(Error::EpisodeFinished);
        }
        let beam = self.cfg.steering.clamp(beam);
        let i = s.bin - 1;
        let rsp_dbm = self.model.rsp_dbm(i, beam);
        let next_state = EnvState {
            bin: s.bin + 1,
            beam,
            benchmark: s.benchmark,
        };
        Ok(StepOutcome {
            reward_db: rsp_dbm - self.benchmark_rsp[i],
            next_state,
            rsp_dbm,
            done: self.is_done(&next_state),
        })
    }
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment")
            .field("bins", &self.bin_count())
            .field("cfg", &self.cfg)
            .finish()
    }
}

/// Discounted sum `sum_t alpha^t R_t`; an empty sequence yields 0.
pub fn discounted_return(rewards: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "discount must lie in (0, 1], got {alpha}"
        )));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= alpha;
    }
    Ok(total)
}

/// One row of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub bin: usize,
    pub action_id: usize,
    pub beam: BeamDirection,
    pub reward_db: f64,
    pub rsp_dbm: f64,
}
