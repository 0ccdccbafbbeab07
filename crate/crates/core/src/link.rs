//! Link budget, received-signal-power vectors and the beamforming objective.

use serde::{Deserialize, Serialize};

use crate::antenna::{array_gain, element_gain, BeamDirection, PanelConfig};
use crate::channel::path_loss;
use crate::error::{Error, Result};
use crate::geometry::{
    arrival_angles_gcs, bin_positions, distances, gcs_to_lcs, LcsAngles, ScenarioConfig, Side,
};

/// The two antenna panels of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panels {
    pub rrh: PanelConfig,
    pub mr: PanelConfig,
}

impl Panels {
    pub fn defaults(cfg: &ScenarioConfig) -> Self {
        Self {
            rrh: PanelConfig::rrh_default(cfg),
            mr: PanelConfig::mr_default(cfg),
        }
    }
}

/// Term-by-term link budget at one position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetBreakdown {
    pub p_t_dbm: f64,
    pub a_e_t: f64,
    pub a_e_r: f64,
    pub a_b_t: f64,
    pub a_b_r: f64,
    pub pl_db: f64,
    pub p_r_dbm: f64,
}

impl LinkBudgetBreakdown {
    fn assemble(p_t_dbm: f64, a_e_t: f64, a_e_r: f64, a_b_t: f64, a_b_r: f64, pl_db: f64) -> Self {
        Self {
            p_t_dbm,
            a_e_t,
            a_e_r,
            a_b_t,
            a_b_r,
            pl_db,
            p_r_dbm: p_t_dbm + a_e_t + a_e_r + a_b_t + a_b_r - pl_db,
        }
    }
}

/// Received signal power at rail position `x` for the given receive and transmit beams.
pub fn rsp(
    x: f64,
    rx_beam: BeamDirection,
    tx_beam: BeamDirection,
    cfg: &ScenarioConfig,
    panels: &Panels,
) -> Result<LinkBudgetBreakdown> {
    let (d2d, d3d) = distances(x, cfg);
    let pl = path_loss(d2d, d3d, cfg)?;
    let tx = gcs_to_lcs(arrival_angles_gcs(x, Side::RrhTx, cfg), panels.rrh.orientation);
    let rx = gcs_to_lcs(arrival_angles_gcs(x, Side::MrRx, cfg), panels.mr.orientation);
    Ok(LinkBudgetBreakdown::assemble(
        cfg.tx_power_dbm,
        element_gain(tx, &panels.rrh),
        element_gain(rx, &panels.mr),
        array_gain(tx, tx_beam, &panels.rrh),
        array_gain(rx, rx_beam, &panels.mr),
        pl.pl_db,
    ))
}

/// Per-bin received power along the rail for one receive-beam policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RspVector {
    pub positions_m: Vec<f64>,
    pub beams: Vec<BeamDirection>,
    pub breakdowns: Vec<LinkBudgetBreakdown>,
}

impl RspVector {
    pub fn len(&self) -> usize {
        self.positions_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_m.is_empty()
    }

    pub fn values_dbm(&self) -> Vec<f64> {
        self.breakdowns.iter().map(|b| b.p_r_dbm).collect()
    }

    /// Zero-based bins whose received power exceeds the transmit power.
    pub fn exceedances(&self) -> Vec<usize> {
        self.breakdowns
            .iter()
            .enumerate()
            .filter(|(_, b)| b.p_r_dbm > b.p_t_dbm)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Evaluates `policy[n]` at every bin centre.
pub fn rsp_vector(
    policy: &[BeamDirection],
    tx_beam: BeamDirection,
    cfg: &ScenarioConfig,
    panels: &Panels,
) -> Result<RspVector> {
    let positions_m = bin_positions(cfg)?;
    if policy.len() != positions_m.len() {
        return Err(Error::LengthMismatch {
            expected: positions_m.len(),
            got: policy.len(),
        });
    }
    let breakdowns = positions_m
        .iter()
        .zip(policy)
        .map(|(&x, &beam)| rsp(x, beam, tx_beam, cfg, panels))
        .collect::<Result<Vec<_>>>()?;
    let v = RspVector {
        positions_m,
        beams: policy.to_vec(),
        breakdowns,
    };
    for i in v.exceedances() {
        log::warn!(
            "received power {:.3} dBm exceeds transmit power at bin {}",
            v.breakdowns[i].p_r_dbm,
            i + 1
        );
    }
    Ok(v)
}

/// Objective value together with the averages the comparisons actually use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    /// `(1 - P_b) * ||P_R||_2` over the dBm entries.
    pub score: f64,
    pub mean_rsp_dbm: f64,
    /// Mean taken in milliwatts, reported back in dBm.
    pub linear_mean_rsp_dbm: f64,
}

pub fn objective(values_dbm: &[f64], cfg: &ScenarioConfig) -> Objective {
    let n = values_dbm.len().max(1) as f64;
    let norm = values_dbm.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mean = values_dbm.iter().sum::<f64>() / n;
    let linear = values_dbm.iter().map(|v| 10f64.powf(v / 10.0)).sum::<f64>() / n;
    Objective {
        score: (1.0 - cfg.blockage_prob) * norm,
        mean_rsp_dbm: mean,
        linear_mean_rsp_dbm: 10.0 * linear.log10(),
    }
}

/// Per-bin link terms that do not depend on the receive beam.
///
/// Splitting the budget this way lets the learning layer evaluate a receive
/// beam with a single array-gain call.
#[derive(Debug, Clone)]
pub struct LinkTable {
    positions_m: Vec<f64>,
    fixed: Vec<LinkBudgetBreakdown>,
    arrivals: Vec<LcsAngles>,
    mr: PanelConfig,
}

impl LinkTable {
    pub fn new(cfg: &ScenarioConfig, panels: &Panels, tx_beam: BeamDirection) -> Result<Self> {
        let positions_m = bin_positions(cfg)?;
        let mut fixed = Vec::with_capacity(positions_m.len());
        let mut arrivals = Vec::with_capacity(positions_m.len());
        for &x in &positions_m {
            let mut b = rsp(x, BeamDirection::ZERO, tx_beam, cfg, panels)?;
            b.p_r_dbm -= b.a_b_r;
            b.a_b_r = 0.0;
            fixed.push(b);
            arrivals.push(gcs_to_lcs(
                arrival_angles_gcs(x, Side::MrRx, cfg),
                panels.mr.orientation,
            ));
        }
        Ok(Self {
            positions_m,
            fixed,
            arrivals,
            mr: panels.mr.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_m.is_empty()
    }

    pub fn positions_m(&self) -> &[f64] {
        &self.positions_m
    }

    pub fn mr_panel(&self) -> &PanelConfig {
        &self.mr
    }

    /// Receive-beam-independent received power at zero-based bin `i`.
    pub fn fixed_dbm(&self, i: usize) -> f64 {
        self.fixed[i].p_r_dbm
    }

    pub fn arrival(&self, i: usize) -> LcsAngles {
        self.arrivals[i]
    }

    /// Received power at zero-based bin `i` with receive beam `beam`.
    pub fn rsp_dbm(&self, i: usize, beam: BeamDirection) -> f64 {
        self.fixed[i].p_r_dbm + array_gain(self.arrivals[i], beam, &self.mr)
    }

    pub fn breakdown(&self, i: usize, beam: BeamDirection) -> LinkBudgetBreakdown {
        let f = self.fixed[i];
        LinkBudgetBreakdown::assemble(
            f.p_t_dbm,
            f.a_e_t,
            f.a_e_r,
            f.a_b_t,
            array_gain(self.arrivals[i], beam, &self.mr),
            f.pl_db,
        )
    }

    /// Assembles the full vector for a per-bin policy.
    pub fn rsp_vector(&self, policy: &[BeamDirection]) -> Result<RspVector> {
        if policy.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: policy.len(),
            });
        }
        Ok(RspVector {
            positions_m: self.positions_m.clone(),
            beams: policy.to_vec(),
            breakdowns: policy
                .iter()
                .enumerate()
                .map(|(i, &b)| self.breakdown(i, b))
                .collect(),
        })
    }
}
