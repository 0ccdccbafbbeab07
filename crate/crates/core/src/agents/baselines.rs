use super::{AgentKind, Rollout, TrainReport};
use crate::antenna::BeamDirection;
use crate::env::Environment;
use crate::error::Result;

/// Starting value of the running maximum in the greedy tracker, dBm.
const P_R_MAX_INIT_DBM: f64 = -200.0;

/// Fixed receive beam at the origin for every bin.
pub fn run_fba(env: &Environment) -> Result<TrainReport> {
    let rollout = Rollout::from_beams(env, vec![BeamDirection::ZERO; env.bin_count()])?;
    Ok(TrainReport::new(AgentKind::Fba, 0, env, rollout, Vec::new()))
}

/// Greedy tracker: at each bin try the nine offsets `{-s, 0, +s}^2` around the
/// previous bin's beam and keep the strongest. Down-tilt offsets form the
/// outer loop, azimuth the inner; a candidate replaces the incumbent only if
/// strictly stronger, so the first of equal candidates wins.
pub fn run_gamma_greedy(env: &Environment) -> Result<TrainReport> {
    let step = env.config().beam_step_deg;
    let offsets = [-step, 0.0, step];
    let steering = env.config().steering;
    let mut prev = BeamDirection::ZERO;
    let mut beams = Vec::with_capacity(env.bin_count());
    for i in 0..env.bin_count() {
        let mut best_p = P_R_MAX_INIT_DBM;
        let mut best = prev;
        for g1 in offsets {
            for g2 in offsets {
                let cand = steering.clamp(BeamDirection::new(prev.theta_deg + g1, prev.phi_deg + g2));
                let p = env.rsp_dbm(i, cand);
                if p > best_p {
                    best_p = p;
                    best = cand;
                }
            }
        }
        beams.push(best);
        prev = best;
    }
    let rollout = Rollout::from_beams(env, beams)?;
    Ok(TrainReport::new(AgentKind::GammaGreedy, 0, env, rollout, Vec::new()))
}
