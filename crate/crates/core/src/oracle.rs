//! Exhaustive per-bin search over receive-beam directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{BeamDirection, SteeringBox};
use crate::error::{Error, Result};
use crate::link::LinkTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub step_deg: f64,
    /// Refuse grids needing more array-gain evaluations than this.
    pub max_evaluations: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            step_deg: 1.0,
            max_evaluations: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub step_deg: f64,
    pub positions_m: Vec<f64>,
    pub best_beams: Vec<BeamDirection>,
    pub best_rsp_dbm: Vec<f64>,
    pub evaluations: u64,
}

fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| min + k as f64 * step).collect()
}

/// Grid points of the steering box at `step_deg`: down-tilt values and
/// azimuth values, each starting at the box minimum.
pub fn grid_axes(steering: &SteeringBox, step_deg: f64) -> (Vec<f64>, Vec<f64>) {
    (
        axis(steering.theta_min_deg, steering.theta_max_deg, step_deg),
        axis(steering.phi_min_deg, steering.phi_max_deg, step_deg),
    )
}

/// Number of evaluations a search would need.
pub fn required_evaluations(bins: usize, steering: &SteeringBox, step_deg: f64) -> u64 {
    let (t, p) = grid_axes(steering, step_deg);
    bins as u64 * t.len() as u64 * p.len() as u64
}

/// Best grid beam per bin. Down-tilt is the outer loop and azimuth the inner;
/// only a strictly larger power replaces the incumbent, so ties keep the
/// first grid point. Bins are searched in parallel and merged in order.
pub fn grid_search(table: &LinkTable, steering: &SteeringBox, cfg: &OracleConfig) -> Result<OracleResult> {
    if !(cfg.step_deg > 0.0 && cfg.step_deg.is_finite()) {
        return Err(Error::InvalidConfig("oracle step_deg must be > 0".into()));
    }
    steering.validate()?;
    let required = required_evaluations(table.len(), steering, cfg.step_deg);
    if required > cfg.max_evaluations {
        return Err(Error::BudgetExceeded {
            required,
            budget: cfg.max_evaluations,
        });
    }
    let (thetas, phis) = grid_axes(steering, cfg.step_deg);
    let best: Vec<(BeamDirection, f64)> = (0..table.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (BeamDirection::new(thetas[0], phis[0]), f64::NEG_INFINITY);
            for &t in &thetas {
                for &p in &phis {
                    let beam = BeamDirection::new(t, p);
                    let rsp = table.rsp_dbm(i, beam);
                    if rsp > best.1 {
                        best = (beam, rsp);
                    }
                }
            }
            best
        })
        .collect();
    Ok(OracleResult {
        step_deg: cfg.step_deg,
        positions_m: table.positions_m().to_vec(),
        best_beams: best.iter().map(|b| b.0).collect(),
        best_rsp_dbm: best.iter().map(|b| b.1).collect(),
        evaluations: required,
    })
}

/// Largest power any beam could give at bin `i`: full coherent array gain.
pub fn rsp_upper_bound_dbm(table: &LinkTable, i: usize) -> f64 {
    table.fixed_dbm(i) + table.mr_panel().max_array_gain_db()
}
