//! Experiment configuration file. Every key is optional; an empty file gives
//! the reference scenario and default hyperparameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentKind, DqnParams, QLearningParams};
use crate::antenna::PanelConfig;
use crate::env::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::geometry::{PanelOrientation, ScenarioConfig};
use crate::link::Panels;
use crate::oracle::OracleConfig;

/// Partial panel description layered over the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelOverrides {
    pub n_h: Option<usize>,
    pub n_v: Option<usize>,
    pub d_v_over_lambda: Option<f64>,
    pub d_h_over_lambda: Option<f64>,
    pub theta_3db_deg: Option<f64>,
    pub phi_3db_deg: Option<f64>,
    pub sla_v_db: Option<f64>,
    pub a_max_db: Option<f64>,
    pub element_gain_max_dbi: Option<f64>,
    /// Derived from the scenario geometry when omitted.
    pub orientation: Option<PanelOrientation>,
}

impl PanelOverrides {
    pub fn apply(&self, mut p: PanelConfig) -> PanelConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        take!(
            n_h,
            n_v,
            d_v_over_lambda,
            d_h_over_lambda,
            theta_3db_deg,
            phi_3db_deg,
            sla_v_db,
            a_max_db,
            element_gain_max_dbi,
            orientation
        );
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaGreedyConfig {
    /// Half-length of a location bin for the greedy tracker, metres.
    pub bin_radius_m: f64,
}

impl Default for GammaGreedyConfig {
    fn default() -> Self {
        Self { bin_radius_m: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatabaseConfig {
    /// Candidate beams kept per bin.
    pub candidates: usize,
    /// Probability of using the best entry in a test cycle.
    pub utilization_prob: f64,
    pub cycles: usize,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        Self {
            candidates: 5,
            utilization_prob: 0.9,
            cycles: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agents: AgentKind::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub rrh_panel: PanelOverrides,
    pub mr_panel: PanelOverrides,
    pub env: EnvConfig,
    pub dqn: DqnParams,
    pub qlearning: QLearningParams,
    pub gamma_greedy: GammaGreedyConfig,
    pub database: DatabaseConfig,
    pub oracle: OracleConfig,
    pub experiment: RunConfig,
}

/// Everything that influences results, with panels fully resolved.
#[derive(Serialize)]
struct HashedView<'a> {
    scenario: &'a ScenarioConfig,
    panels: Panels,
    env: &'a EnvConfig,
    dqn: &'a DqnParams,
    qlearning: &'a QLearningParams,
    gamma_greedy: &'a GammaGreedyConfig,
    database: &'a DatabaseConfig,
    oracle: &'a OracleConfig,
}

impl ExperimentConfig {
    /// Parses TOML text; syntax and type errors carry the offending line.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Format {
                kind: "config",
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let panels = self.panels();
        panels.rrh.validate()?;
        panels.mr.validate()?;
        self.env.validate()?;
        self.dqn.validate()?;
        self.qlearning.validate()?;
        self.gamma_scenario().validate()?;
        if self.database.candidates == 0 {
            return Err(Error::InvalidConfig("database.candidates must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.database.utilization_prob) {
            return Err(Error::InvalidConfig("database.utilization_prob must lie in [0, 1]".into()));
        }
        if self.database.cycles == 0 {
            return Err(Error::InvalidConfig("database.cycles must be >= 1".into()));
        }
        if !(self.oracle.step_deg > 0.0) {
            return Err(Error::InvalidConfig("oracle.step_deg must be > 0".into()));
        }
        if self.experiment.seeds.is_empty() {
            return Err(Error::InvalidConfig("experiment.seeds must not be empty".into()));
        }
        Ok(())
    }

    pub fn panels(&self) -> Panels {
        Panels {
            rrh: self.rrh_panel.apply(PanelConfig::rrh_default(&self.scenario)),
            mr: self.mr_panel.apply(PanelConfig::mr_default(&self.scenario)),
        }
    }

    /// The scenario re-binned for the greedy tracker.
    pub fn gamma_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            bin_radius_m: self.gamma_greedy.bin_radius_m,
            ..self.scenario.clone()
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        Environment::new(&self.scenario, &self.panels(), self.env.clone())
    }

    pub fn gamma_environment(&self) -> Result<Environment> {
        let scenario = self.gamma_scenario();
        let panels = Panels {
            rrh: self.rrh_panel.apply(PanelConfig::rrh_default(&scenario)),
            mr: self.mr_panel.apply(PanelConfig::mr_default(&scenario)),
        };
        Environment::new(&scenario, &panels, self.env.clone())
    }

    /// SHA-256 over the result-relevant settings (the `[experiment]` run
    /// list and output directory are excluded).
    pub fn config_hash(&self) -> String {
        let view = HashedView {
            scenario: &self.scenario,
            panels: self.panels(),
            env: &self.env,
            dqn: &self.dqn,
            qlearning: &self.qlearning,
            gamma_greedy: &self.gamma_greedy,
            database: &self.database,
            oracle: &self.oracle,
        };
        let json = serde_json::to_string(&view).unwrap_or_default();
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
