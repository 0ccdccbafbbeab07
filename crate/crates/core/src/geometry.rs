//! Rail and RRH layout, location bins, distances and departure/arrival angles.
//!
//! Global frame (GCS): `x` runs along the rail in the direction of travel,
//! `y` points from the rail toward the RRH side, `z` is up. The rail lies on
//! `y = 0`; the serving RRH stands at `(rrh_offset, d_min, h_R)` and the mobile
//! relay (MR) at `(x, 0, h_T)`. Zenith angles are measured from `+z`, azimuths
//! from `+x` toward `+y`. All angles cross the public API in degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical layout and link constants of one rail unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rail_length_m: f64,
    pub bin_radius_m: f64,
    pub rrh_offset_m: f64,
    pub d_min_m: f64,
    pub d_s_m: f64,
    pub rrh_height_m: f64,
    pub mr_height_m: f64,
    pub carrier_hz: f64,
    pub tx_power_dbm: f64,
    pub avg_building_height_m: f64,
    pub blockage_prob: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            rail_length_m: 2000.0,
            bin_radius_m: 2.5,
            rrh_offset_m: 700.0,
            d_min_m: 150.0,
            d_s_m: 700.0,
            rrh_height_m: 15.0,
            mr_height_m: 5.0,
            carrier_hz: 30.0e9,
            tx_power_dbm: 31.0,
            avg_building_height_m: 5.0,
            blockage_prob: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.rail_length_m > 0.0) {
            return bad(format!("rail_length_m must be > 0, got {}", self.rail_length_m));
        }
        if !(self.bin_radius_m > 0.0) {
            return bad(format!("bin_radius_m must be > 0, got {}", self.bin_radius_m));
        }
        bin_steps(self)?;
        if !(5.0..=50.0).contains(&self.avg_building_height_m) {
            return bad(format!(
                "avg_building_height_m must lie in [5, 50], got {}",
                self.avg_building_height_m
            ));
        }
        if !(self.mr_height_m > 0.0 && self.rrh_height_m > self.mr_height_m) {
            return bad(format!(
                "heights must satisfy rrh_height_m > mr_height_m > 0, got {} and {}",
                self.rrh_height_m, self.mr_height_m
            ));
        }
        if !(self.carrier_hz > 0.0) {
            return bad(format!("carrier_hz must be > 0, got {}", self.carrier_hz));
        }
        if !(0.0..=1.0).contains(&self.blockage_prob) {
            return bad(format!("blockage_prob must lie in [0, 1], got {}", self.blockage_prob));
        }
        if !(self.d_min_m > 0.0) || !(self.d_s_m > 0.0) {
            return bad("d_min_m and d_s_m must be > 0".to_string());
        }
        if !self.tx_power_dbm.is_finite() || !self.rrh_offset_m.is_finite() {
            return bad("tx_power_dbm and rrh_offset_m must be finite".to_string());
        }
        Ok(())
    }

    /// Carrier wavelength in metres.
    pub fn wavelength_m(&self) -> f64 {
        crate::channel::SPEED_OF_LIGHT_M_S / self.carrier_hz
    }
}

/// Number of bin steps `L / (2 sigma_D)`, rejecting non-integral ratios.
fn bin_steps(cfg: &ScenarioConfig) -> Result<usize> {
    let ratio = cfg.rail_length_m / (2.0 * cfg.bin_radius_m);
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "rail_length_m ({}) must be a positive integer multiple of 2*bin_radius_m ({})",
            cfg.rail_length_m,
            2.0 * cfg.bin_radius_m
        )));
    }
    Ok(rounded as usize)
}

/// Number of location bins on the rail, `N = L / (2 sigma_D) + 1`.
pub fn bin_count(cfg: &ScenarioConfig) -> Result<usize> {
    Ok(bin_steps(cfg)? + 1)
}

/// One-based location-bin index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinIndex(usize);

impl BinIndex {
    pub fn new(n: usize, cfg: &ScenarioConfig) -> Result<Self> {
        let count = bin_count(cfg)?;
        if n == 0 || n > count {
            return Err(Error::BinOutOfRange { index: n, count });
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Bin centre along the rail, `(n - 1) * 2 sigma_D`.
pub fn bin_position(n: BinIndex, cfg: &ScenarioConfig) -> f64 {
    (n.0 - 1) as f64 * 2.0 * cfg.bin_radius_m
}

/// Bin centres for every bin of the scenario.
pub fn bin_positions(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    let count = bin_count(cfg)?;
    Ok((0..count)
        .map(|i| i as f64 * 2.0 * cfg.bin_radius_m)
        .collect())
}

/// Horizontal and slant distance between the MR at `x` and the RRH.
pub fn distances(x: f64, cfg: &ScenarioConfig) -> (f64, f64) {
    let dx = x - cfg.rrh_offset_m;
    let d2d = dx.hypot(cfg.d_min_m);
    let dz = cfg.rrh_height_m - cfg.mr_height_m;
    (d2d, d2d.hypot(dz))
}

/// Which end of the link an angle is measured at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Departure from the RRH toward the MR.
    RrhTx,
    /// Arrival at the MR from the RRH.
    MrRx,
}

/// Direction in the global frame: zenith `theta` in [0, 180], azimuth `phi` in (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcsAngles {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

/// Direction in a panel's local frame, where `(90, 0)` is boresight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcsAngles {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

/// Mechanical pointing of a panel: boresight azimuth and downward tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelOrientation {
    pub bearing_deg: f64,
    pub downtilt_deg: f64,
}

impl PanelOrientation {
    pub const IDENTITY: Self = Self {
        bearing_deg: 0.0,
        downtilt_deg: 0.0,
    };

    /// RRH boresight aimed at the rail point abeam the neighbouring RRH up-track.
    pub fn default_rrh(cfg: &ScenarioConfig) -> Self {
        let bearing = (-cfg.d_min_m).atan2(-cfg.d_s_m).to_degrees();
        Self {
            bearing_deg: wrap_azimuth(bearing),
            downtilt_deg: 0.0,
        }
    }

    /// MR boresight at the reciprocal bearing of the RRH panel.
    pub fn default_mr(cfg: &ScenarioConfig) -> Self {
        let rrh = Self::default_rrh(cfg);
        Self {
            bearing_deg: wrap_azimuth(rrh.bearing_deg + 180.0),
            downtilt_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bearing_deg > -180.0 && self.bearing_deg <= 180.0) {
            return Err(Error::InvalidConfig(format!(
                "bearing_deg must lie in (-180, 180], got {}",
                self.bearing_deg
            )));
        }
        if !(-90.0..=90.0).contains(&self.downtilt_deg) {
            return Err(Error::InvalidConfig(format!(
                "downtilt_deg must lie in [-90, 90], got {}",
                self.downtilt_deg
            )));
        }
        Ok(())
    }
}

/// Maps an azimuth onto (-180, 180].
pub fn wrap_azimuth(phi_deg: f64) -> f64 {
    let mut p = phi_deg % 360.0;
    if p <= -180.0 {
        p += 360.0;
    } else if p > 180.0 {
        p -= 360.0;
    }
    p
}

fn unit_vector(theta_deg: f64, phi_deg: f64) -> [f64; 3] {
    let (st, ct) = theta_deg.to_radians().sin_cos();
    let (sp, cp) = phi_deg.to_radians().sin_cos();
    [st * cp, st * sp, ct]
}

fn vector_angles(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let theta = (v[2] / r).clamp(-1.0, 1.0).acos().to_degrees();
    let phi = wrap_azimuth(v[1].atan2(v[0]).to_degrees());
    (theta, phi)
}

/// Angles of the line of sight at `side`, in the global frame.
///
/// For the MR side the vector points from the MR to the RRH; for the RRH side
/// it points from the RRH to the MR.
pub fn arrival_angles_gcs(x: f64, side: Side, cfg: &ScenarioConfig) -> GcsAngles {
    let to_rrh = [
        cfg.rrh_offset_m - x,
        cfg.d_min_m,
        cfg.rrh_height_m - cfg.mr_height_m,
    ];
    let v = match side {
        Side::MrRx => to_rrh,
        Side::RrhTx => [-to_rrh[0], -to_rrh[1], -to_rrh[2]],
    };
    let (theta_deg, phi_deg) = vector_angles(v);
    GcsAngles { theta_deg, phi_deg }
}

/// Rotates a global direction into the panel frame: `-bearing` about `z`,
/// then `-downtilt` about the panel's horizontal axis.
pub fn gcs_to_lcs(a: GcsAngles, o: PanelOrientation) -> LcsAngles {
    let [x, y, z] = unit_vector(a.theta_deg, a.phi_deg);
    let (sb, cb) = o.bearing_deg.to_radians().sin_cos();
    let (x1, y1) = (cb * x + sb * y, -sb * x + cb * y);
    let (st, ct) = o.downtilt_deg.to_radians().sin_cos();
    let (x2, z2) = (ct * x1 - st * z, st * x1 + ct * z);
    let (theta_deg, phi_deg) = vector_angles([x2, y1, z2]);
    LcsAngles { theta_deg, phi_deg }
}

/// Inverse of [`gcs_to_lcs`].
pub fn lcs_to_gcs(a: LcsAngles, o: PanelOrientation) -> GcsAngles {
    let [x2, y1, z2] = unit_vector(a.theta_deg, a.phi_deg);
    let (st, ct) = o.downtilt_deg.to_radians().sin_cos();
    let (x1, z) = (ct * x2 + st * z2, -st * x2 + ct * z2);
    let (sb, cb) = o.bearing_deg.to_radians().sin_cos();
    let (x, y) = (cb * x1 - sb * y1, sb * x1 + cb * y1);
    let (theta_deg, phi_deg) = vector_angles([x, y, z]);
    GcsAngles { theta_deg, phi_deg }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bin_count_matches_table_values() {
        let cfg = ScenarioConfig::default();
        assert_eq!(bin_count(&cfg).unwrap(), 401);

        let single = ScenarioConfig {
            rail_length_m: 5.0,
            ..ScenarioConfig::default()
        };
        assert_eq!(bin_count(&single).unwrap(), 2);

        let metre_bins = ScenarioConfig {
            rail_length_m: 100.0,
            bin_radius_m: 0.5,
            ..ScenarioConfig::default()
        };
        assert_eq!(bin_count(&metre_bins).unwrap(), 101);
    }

    #[test]
    fn bin_count_rejects_fractional_ratio() {
        let cfg = ScenarioConfig {
            rail_length_m: 2001.0,
            ..ScenarioConfig::default()
        };
        assert!(matches!(bin_count(&cfg), Err(Error::InvalidConfig(_))));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bin_positions_hit_the_landmarks() {
        let cfg = ScenarioConfig::default();
        let at = |n| bin_position(BinIndex::new(n, &cfg).unwrap(), &cfg);
        assert_eq!(at(1), 0.0);
        assert_eq!(at(141), 700.0);
        assert_eq!(at(401), 2000.0);
        assert!(matches!(
            BinIndex::new(0, &cfg),
            Err(Error::BinOutOfRange { .. })
        ));
        assert!(BinIndex::new(402, &cfg).is_err());
    }

    #[test]
    fn distances_by_pythagoras() {
        let cfg = ScenarioConfig::default();
        let (d2, d3) = distances(700.0, &cfg);
        assert_abs_diff_eq!(d2, 150.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d3, 150.332_963_783_729_1, epsilon = 1e-9);
        assert_abs_diff_eq!(distances(0.0, &cfg).0, 715.891_053_163_818_6, epsilon = 1e-9);
        assert_abs_diff_eq!(distances(2000.0, &cfg).0, 1_308.625_232_830_24, epsilon = 1e-9);
    }

    #[test]
    fn distances_are_ordered() {
        let cfg = ScenarioConfig::default();
        for x in bin_positions(&cfg).unwrap() {
            let (d2, d3) = distances(x, &cfg);
            assert!(d3 >= d2 && d2 >= cfg.d_min_m);
        }
    }

    #[test]
    fn mr_arrival_abeam_the_rrh() {
        let cfg = ScenarioConfig::default();
        let a = arrival_angles_gcs(700.0, Side::MrRx, &cfg);
        assert_abs_diff_eq!(a.phi_deg, 90.0, epsilon = 1e-12);
        let expected = (10.0 / 150.332_963_783_729_1_f64).acos().to_degrees();
        assert_abs_diff_eq!(a.theta_deg, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(a.theta_deg, 86.185, epsilon = 1e-3);

        let tx = arrival_angles_gcs(700.0, Side::RrhTx, &cfg);
        assert_abs_diff_eq!(tx.phi_deg, -90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tx.theta_deg, 180.0 - expected, epsilon = 1e-9);
    }

    #[test]
    fn equal_heights_give_horizontal_arrival() {
        let cfg = ScenarioConfig {
            rrh_height_m: 5.0,
            ..ScenarioConfig::default()
        };
        assert_eq!(arrival_angles_gcs(123.0, Side::MrRx, &cfg).theta_deg, 90.0);
    }

    #[test]
    fn far_along_the_rail_the_arrival_flattens() {
        let cfg = ScenarioConfig::default();
        let far = arrival_angles_gcs(1.0e7, Side::MrRx, &cfg);
        assert!((far.theta_deg - 90.0).abs() < 1e-4);
    }

    #[test]
    fn arrival_is_mirror_symmetric_about_the_rrh() {
        let cfg = ScenarioConfig::default();
        for d in [5.0, 50.0, 333.0, 700.0] {
            let left = arrival_angles_gcs(cfg.rrh_offset_m - d, Side::MrRx, &cfg);
            let right = arrival_angles_gcs(cfg.rrh_offset_m + d, Side::MrRx, &cfg);
            assert_abs_diff_eq!((left.phi_deg - 90.0).abs(), (right.phi_deg - 90.0).abs(), epsilon = 1e-9);
            assert_abs_diff_eq!(left.theta_deg, right.theta_deg, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_orientation_is_a_no_op() {
        let a = GcsAngles {
            theta_deg: 71.5,
            phi_deg: -33.25,
        };
        let l = gcs_to_lcs(a, PanelOrientation::IDENTITY);
        assert_abs_diff_eq!(l.theta_deg, a.theta_deg, epsilon = 1e-12);
        assert_abs_diff_eq!(l.phi_deg, a.phi_deg, epsilon = 1e-12);
    }

    #[test]
    fn boresight_maps_to_zero_azimuth() {
        let o = PanelOrientation {
            bearing_deg: 30.0,
            downtilt_deg: 0.0,
        };
        let l = gcs_to_lcs(
            GcsAngles {
                theta_deg: 90.0,
                phi_deg: 30.0,
            },
            o,
        );
        assert_abs_diff_eq!(l.phi_deg, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.theta_deg, 90.0, epsilon = 1e-12);

        // a tilted boresight also lands on (90, 0)
        let tilted = PanelOrientation {
            bearing_deg: -120.0,
            downtilt_deg: 10.0,
        };
        let l = gcs_to_lcs(
            GcsAngles {
                theta_deg: 100.0,
                phi_deg: -120.0,
            },
            tilted,
        );
        assert_abs_diff_eq!(l.theta_deg, 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(l.phi_deg, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn default_orientations_face_each_other() {
        let cfg = ScenarioConfig::default();
        let rrh = PanelOrientation::default_rrh(&cfg);
        let mr = PanelOrientation::default_mr(&cfg);
        assert_abs_diff_eq!(rrh.bearing_deg, -167.905, epsilon = 1e-3);
        assert_abs_diff_eq!(mr.bearing_deg, 12.095, epsilon = 1e-3);
        // at the start of the rail the MR boresight points straight at the RRH
        let a = arrival_angles_gcs(0.0, Side::MrRx, &cfg);
        assert_abs_diff_eq!(gcs_to_lcs(a, mr).phi_deg, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn wrap_azimuth_range() {
        assert_eq!(wrap_azimuth(-180.0), 180.0);
        assert_eq!(wrap_azimuth(190.0), -170.0);
        assert_eq!(wrap_azimuth(540.0), 180.0);
        assert_eq!(wrap_azimuth(-45.0), -45.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn lcs_round_trip(
            theta in 1.0f64..179.0,
            phi in -179.9f64..180.0,
            bearing in -179.9f64..180.0,
            tilt in -90.0f64..=90.0,
        ) {
            let o = PanelOrientation { bearing_deg: bearing, downtilt_deg: tilt };
            let l = LcsAngles { theta_deg: theta, phi_deg: phi };
            let back = gcs_to_lcs(lcs_to_gcs(l, o), o);
            prop_assert!((back.theta_deg - theta).abs() < 1e-9);
            prop_assert!(wrap_azimuth(back.phi_deg - phi).abs() < 1e-9);
        }
    }
}
