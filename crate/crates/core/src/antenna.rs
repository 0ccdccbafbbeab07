//! Element radiation pattern and composite planar-array gain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LcsAngles, PanelOrientation, ScenarioConfig};

/// Array gain reported when the combined phasor magnitude underflows.
pub const ARRAY_GAIN_FLOOR_DB: f64 = -120.0;
const MAGNITUDE_FLOOR: f64 = 1e-12;

/// Antenna panel: element pattern parameters, planar layout and pointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    pub n_h: usize,
    pub n_v: usize,
    pub d_v_over_lambda: f64,
    pub d_h_over_lambda: f64,
    pub theta_3db_deg: f64,
    pub phi_3db_deg: f64,
    pub sla_v_db: f64,
    pub a_max_db: f64,
    pub element_gain_max_dbi: f64,
    pub orientation: PanelOrientation,
}

impl PanelConfig {
    /// Trackside RRH panel with the simulation-table parameters.
    pub fn rrh_default(cfg: &ScenarioConfig) -> Self {
        Self {
            n_h: 4,
            n_v: 2,
            d_v_over_lambda: 0.5,
            d_h_over_lambda: 0.5,
            theta_3db_deg: 65.0,
            phi_3db_deg: 65.0,
            sla_v_db: 30.0,
            a_max_db: 30.0,
            element_gain_max_dbi: 8.0,
            orientation: PanelOrientation::default_rrh(cfg),
        }
    }

    /// Rooftop MR panel with the simulation-table parameters.
    pub fn mr_default(cfg: &ScenarioConfig) -> Self {
        Self {
            n_h: 4,
            n_v: 2,
            d_v_over_lambda: 0.5,
            d_h_over_lambda: 0.5,
            theta_3db_deg: 90.0,
            phi_3db_deg: 90.0,
            sla_v_db: 25.0,
            a_max_db: 25.0,
            element_gain_max_dbi: 5.0,
            orientation: PanelOrientation::default_mr(cfg),
        }
    }

    pub fn element_count(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Upper bound of [`array_gain`], `10 log10(N_H N_V)`.
    pub fn max_array_gain_db(&self) -> f64 {
        10.0 * (self.element_count() as f64).log10()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_h < 1 || self.n_v < 1 {
            return bad("panel needs n_h >= 1 and n_v >= 1");
        }
        if !(self.theta_3db_deg > 0.0 && self.phi_3db_deg > 0.0) {
            return bad("panel beamwidths must be > 0");
        }
        if !(self.sla_v_db >= 0.0 && self.a_max_db >= 0.0 && self.element_gain_max_dbi >= 0.0) {
            return bad("sla_v_db, a_max_db and element_gain_max_dbi must be >= 0");
        }
        if !(self.d_v_over_lambda > 0.0 && self.d_h_over_lambda > 0.0) {
            return bad("element spacings must be > 0");
        }
        self.orientation.validate()
    }
}

/// Receive (or transmit) beam steering pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BeamDirection {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl BeamDirection {
    pub const ZERO: Self = Self {
        theta_deg: 0.0,
        phi_deg: 0.0,
    };

    pub fn new(theta_deg: f64, phi_deg: f64) -> Self {
        Self { theta_deg, phi_deg }
    }
}

/// Admissible steering range; relative moves are clamped into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringBox {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub phi_min_deg: f64,
    pub phi_max_deg: f64,
}

impl Default for SteeringBox {
    fn default() -> Self {
        Self {
            theta_min_deg: -90.0,
            theta_max_deg: 90.0,
            phi_min_deg: -180.0,
            phi_max_deg: 180.0,
        }
    }
}

impl SteeringBox {
    pub fn clamp(&self, b: BeamDirection) -> BeamDirection {
        BeamDirection {
            theta_deg: b.theta_deg.clamp(self.theta_min_deg, self.theta_max_deg),
            phi_deg: b.phi_deg.clamp(self.phi_min_deg, self.phi_max_deg),
        }
    }

    pub fn contains(&self, b: BeamDirection) -> bool {
        (self.theta_min_deg..=self.theta_max_deg).contains(&b.theta_deg)
            && (self.phi_min_deg..=self.phi_max_deg).contains(&b.phi_deg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min_deg <= self.theta_max_deg && self.phi_min_deg <= self.phi_max_deg) {
            return Err(Error::InvalidConfig("steering box bounds are inverted".into()));
        }
        if self.theta_min_deg < -180.0
            || self.theta_max_deg > 180.0
            || self.phi_min_deg < -180.0
            || self.phi_max_deg > 180.0
        {
            return Err(Error::InvalidConfig(
                "steering box must lie within theta [-180, 180], phi [-180, 180]".into(),
            ));
        }
        Ok(())
    }
}

/// Element attenuation in dB (`<= 0`) for a direction in the panel frame.
pub fn element_attenuation(lcs: LcsAngles, p: &PanelConfig) -> f64 {
    let vertical = -(12.0 * ((lcs.theta_deg - 90.0) / p.theta_3db_deg).powi(2)).min(p.sla_v_db);
    let horizontal = -(12.0 * (lcs.phi_deg / p.phi_3db_deg).powi(2)).min(p.a_max_db);
    -(-(vertical + horizontal)).min(p.a_max_db)
}

/// Element gain in dBi; never exceeds the panel's maximum directional gain.
pub fn element_gain(lcs: LcsAngles, p: &PanelConfig) -> f64 {
    p.element_gain_max_dbi + element_attenuation(lcs, p)
}

/// Composite array gain in dB for arrival direction `lcs` and steering `beam`.
///
/// Evaluates the full `N_V x N_H` superposition with unit-modulus phasors and
/// `1/sqrt(N_H N_V)` weights; falls back to [`ARRAY_GAIN_FLOOR_DB`] when the
/// squared magnitude drops below `1e-12`.
pub fn array_gain(lcs: LcsAngles, beam: BeamDirection, p: &PanelConfig) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let (st_e, ct_e) = lcs.theta_deg.to_radians().sin_cos();
    let sp_e = lcs.phi_deg.to_radians().sin();
    let (st_b, ct_b) = beam.theta_deg.to_radians().sin_cos();
    let sp_b = beam.phi_deg.to_radians().sin();
    let norm = 1.0 / (p.element_count() as f64).sqrt();

    let mut sum = Complex64::new(0.0, 0.0);
    for m in 0..p.n_h {
        for n in 0..p.n_v {
            let (nf, mf) = (n as f64, m as f64);
            let v = Complex64::from_polar(
                1.0,
                tau * (nf * p.d_v_over_lambda * ct_e + mf * p.d_h_over_lambda * st_e * sp_e),
            );
            let w = Complex64::from_polar(
                norm,
                tau * (nf * p.d_v_over_lambda * st_b - mf * p.d_h_over_lambda * ct_b * sp_b),
            );
            sum += w * v;
        }
    }
    let power = sum.norm_sqr();
    if power < MAGNITUDE_FLOOR {
        ARRAY_GAIN_FLOOR_DB
    } else {
        10.0 * power.log10()
    }
}
