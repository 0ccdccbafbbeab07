//! Line-of-sight large-scale path loss with a break-point distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScenarioConfig;

pub const SPEED_OF_LIGHT_M_S: f64 = 3.0e8;

const MIN_D2D_M: f64 = 10.0;
const MAX_D2D_M: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathLossBranch {
    /// Below the break point.
    Pl1,
    /// Beyond the break point, 40 dB/decade.
    Pl2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossResult {
    pub pl_db: f64,
    pub branch: PathLossBranch,
    pub d_bp_m: f64,
}

/// `d_BP = 2 pi h_R h_T f_c / c`, with `f_c` in Hz.
pub fn break_point_distance(cfg: &ScenarioConfig) -> f64 {
    2.0 * std::f64::consts::PI * cfg.rrh_height_m * cfg.mr_height_m * cfg.carrier_hz
        / SPEED_OF_LIGHT_M_S
}

/// Near-segment loss as a function of slant distance. `f_c` enters normalised by 1 GHz.
fn pl1(d3d: f64, cfg: &ScenarioConfig) -> f64 {
    let fc_ghz = cfg.carrier_hz / 1.0e9;
    let h = cfg.avg_building_height_m;
    let hp = h.powf(1.72);
    20.0 * (40.0 * std::f64::consts::PI * d3d * fc_ghz / 3.0).log10()
        - (0.044 * hp).min(14.77)
        + (0.03 * hp).min(10.0) * d3d.log10()
        + 0.002 * h.log10() * d3d
}

/// Path loss for a link with horizontal distance `d2d_m` and slant distance `d3d_m`.
pub fn path_loss(d2d_m: f64, d3d_m: f64, cfg: &ScenarioConfig) -> Result<PathLossResult> {
    if !(MIN_D2D_M..=MAX_D2D_M).contains(&d2d_m) {
        return Err(Error::Domain { d2d_m });
    }
    let d_bp_m = break_point_distance(cfg);
    if d2d_m <= d_bp_m {
        return Ok(PathLossResult {
            pl_db: pl1(d3d_m, cfg),
            branch: PathLossBranch::Pl1,
            d_bp_m,
        });
    }
    // slant distance of the break point in this scenario's geometry
    let d3d_bp = d_bp_m.hypot(cfg.rrh_height_m - cfg.mr_height_m);
    Ok(PathLossResult {
        pl_db: pl1(d3d_bp, cfg) + 40.0 * (d3d_m / d3d_bp).log10(),
        branch: PathLossBranch::Pl2,
        d_bp_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distances;
    use approx::assert_abs_diff_eq;

    /// Low-carrier scenario whose break point falls inside the valid range.
    fn low_frequency() -> ScenarioConfig {
        ScenarioConfig {
            carrier_hz: 0.3e9,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn break_point_at_table_values() {
        let cfg = ScenarioConfig::default();
        assert_abs_diff_eq!(
            break_point_distance(&cfg),
            15_000.0 * std::f64::consts::PI,
            epsilon = 1e-6
        );
        let doubled = ScenarioConfig {
            carrier_hz: 60.0e9,
            ..cfg.clone()
        };
        assert_abs_diff_eq!(
            break_point_distance(&doubled),
            2.0 * break_point_distance(&cfg),
            epsilon = 1e-9
        );
        let grounded = ScenarioConfig {
            mr_height_m: 0.0,
            ..cfg
        };
        assert_eq!(break_point_distance(&grounded), 0.0);
        assert!(grounded.validate().is_err());
    }

    #[test]
    fn pl1_abeam_the_rrh() {
        // term-by-term: 105.526 - 0.701 + 1.040 + 0.210
        let cfg = ScenarioConfig::default();
        let (d2, d3) = distances(700.0, &cfg);
        let r = path_loss(d2, d3, &cfg).unwrap();
        assert_eq!(r.branch, PathLossBranch::Pl1);
        assert_abs_diff_eq!(r.pl_db, 106.075, epsilon = 0.01);
    }

    #[test]
    fn caps_saturate_for_tall_buildings() {
        let cfg = ScenarioConfig {
            avg_building_height_m: 50.0,
            ..ScenarioConfig::default()
        };
        let d3: f64 = 200.0;
        let hand = 20.0 * (40.0 * std::f64::consts::PI * d3 * 30.0 / 3.0).log10() - 14.77
            + 10.0 * d3.log10()
            + 0.002 * 50f64.log10() * d3;
        assert_abs_diff_eq!(path_loss(190.0, d3, &cfg).unwrap().pl_db, hand, epsilon = 1e-9);
    }

    #[test]
    fn branch_switch_is_continuous() {
        let cfg = low_frequency();
        let dbp = break_point_distance(&cfg);
        let dz = cfg.rrh_height_m - cfg.mr_height_m;
        let at = path_loss(dbp, dbp.hypot(dz), &cfg).unwrap();
        assert_eq!(at.branch, PathLossBranch::Pl1);
        let just = dbp * (1.0 + 1e-15);
        let beyond = path_loss(just, just.hypot(dz), &cfg).unwrap();
        assert_eq!(beyond.branch, PathLossBranch::Pl2);
        assert!((at.pl_db - beyond.pl_db).abs() < 1e-9);
    }

    #[test]
    fn pl2_slope_is_40_db_per_decade() {
        let cfg = low_frequency();
        let a = path_loss(1000.0, 1000.0, &cfg).unwrap();
        let b = path_loss(10_000.0, 10_000.0, &cfg).unwrap();
        assert_eq!(a.branch, PathLossBranch::Pl2);
        assert_abs_diff_eq!(b.pl_db - a.pl_db, 40.0, epsilon = 1e-9);
    }

    #[test]
    fn outside_validity_is_a_domain_error() {
        let cfg = ScenarioConfig::default();
        assert!(matches!(path_loss(9.99, 12.0, &cfg), Err(Error::Domain { .. })));
        assert!(matches!(
            path_loss(10_000.1, 10_000.1, &cfg),
            Err(Error::Domain { .. })
        ));
        assert!(path_loss(10.0, 14.0, &cfg).is_ok());
    }

    #[test]
    fn increasing_in_distance_on_a_metre_grid() {
        for h in [5.0, 20.0, 50.0] {
            let cfg = ScenarioConfig {
                avg_building_height_m: h,
                ..ScenarioConfig::default()
            };
            let mut prev = f64::NEG_INFINITY;
            for d in 10..=10_000 {
                let d2 = d as f64;
                let d3 = d2.hypot(10.0);
                let pl = path_loss(d2, d3, &cfg).unwrap().pl_db;
                assert!(pl > prev && pl > 0.0);
                prev = pl;
            }
        }
    }

    #[test]
    fn building_height_effect_is_bounded_by_the_caps() {
        let low = ScenarioConfig::default();
        let high = ScenarioConfig {
            avg_building_height_m: 50.0,
            ..ScenarioConfig::default()
        };
        for d in (10..=10_000).step_by(7) {
            let d2 = d as f64;
            let d3 = d2.hypot(10.0);
            let diff = path_loss(d2, d3, &high).unwrap().pl_db - path_loss(d2, d3, &low).unwrap().pl_db;
            let bound = 14.77 + 10.0 * d3.log10();
            assert!(diff.abs() <= bound, "d={d} diff={diff} bound={bound}");
        }
    }
}
