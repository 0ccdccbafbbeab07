//! Post-learning database of ranked candidate beams per bin, and the
//! utilisation/exploration test cycles run over it.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{argmax, QFunction};
use crate::antenna::BeamDirection;
use crate::env::{BeamActions, Environment};
use crate::error::{Error, Result};
use crate::nn::{NumberedLines, WeightMeta};

pub const BEAMDB_FILE_MAGIC: &str = "RAILBEAM-BEAMDB";
pub const BEAMDB_FILE_VERSION: u32 = 1;

const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub beam: BeamDirection,
    pub rsp_dbm: f64,
}

/// Per bin, `D_C` candidate beams sorted best-first by recorded power.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamDatabase {
    bins: Vec<Vec<Candidate>>,
    pub utilization_prob: f64,
}

fn sort_best_first(list: &mut [Candidate]) {
    // stable: equal powers keep their Q-value order
    list.sort_by(|a, b| b.rsp_dbm.total_cmp(&a.rsp_dbm));
}

impl BeamDatabase {
    pub fn from_entries(bins: Vec<Vec<Candidate>>, utilization_prob: f64) -> Result<Self> {
        let Some(first) = bins.first() else {
            return Err(Error::InvalidConfig("database needs at least one bin".into()));
        };
        let dc = first.len();
        if dc == 0 {
            return Err(Error::InvalidConfig("database needs D_C >= 1 candidates".into()));
        }
        if let Some(bad) = bins.iter().find(|l| l.len() != dc) {
            return Err(Error::LengthMismatch {
                expected: dc,
                got: bad.len(),
            });
        }
        if !(0.0..=1.0).contains(&utilization_prob) {
            return Err(Error::InvalidConfig("utilization probability must lie in [0, 1]".into()));
        }
        let mut db = Self {
            bins,
            utilization_prob,
        };
        db.bins.iter_mut().for_each(|l| sort_best_first(l));
        Ok(db)
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn candidates_per_bin(&self) -> usize {
        self.bins[0].len()
    }

    /// Candidates at zero-based bin `i`, best first.
    pub fn entries(&self, i: usize) -> &[Candidate] {
        &self.bins[i]
    }

    pub fn best_beams(&self) -> Vec<BeamDirection> {
        self.bins.iter().map(|l| l[0].beam).collect()
    }

    pub fn is_sorted(&self) -> bool {
        self.bins
            .iter()
            .all(|l| l.windows(2).all(|w| w[0].rsp_dbm >= w[1].rsp_dbm))
    }

    /// Replaces the recorded power of one entry and restores the ordering.
    pub fn record(&mut self, i: usize, rank: usize, rsp_dbm: f64) {
        self.bins[i][rank].rsp_dbm = rsp_dbm;
        sort_best_first(&mut self.bins[i]);
    }

    /// Versioned text table: one `bin rank theta phi rsp` row per entry.
    pub fn save<W: Write>(&self, mut w: W, meta: &WeightMeta) -> Result<()> {
        writeln!(w, "{BEAMDB_FILE_MAGIC} {BEAMDB_FILE_VERSION}")?;
        writeln!(w, "config_hash {}", meta.config_hash)?;
        writeln!(w, "seed {}", meta.seed)?;
        writeln!(w, "agent {}", meta.agent)?;
        writeln!(w, "utilization_prob {:e}", self.utilization_prob)?;
        writeln!(w, "shape {} {}", self.bin_count(), self.candidates_per_bin())?;
        writeln!(w, "bin rank theta_deg phi_deg rsp_dbm")?;
        for (i, list) in self.bins.iter().enumerate() {
            for (r, c) in list.iter().enumerate() {
                writeln!(
                    w,
                    "{} {} {:e} {:e} {:e}",
                    i + 1,
                    r + 1,
                    c.beam.theta_deg,
                    c.beam.phi_deg,
                    c.rsp_dbm
                )?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<(Self, WeightMeta)> {
        let mut lines = NumberedLines::new(r, "beam database");
        let header = lines.next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(BEAMDB_FILE_MAGIC) {
            return Err(lines.error("missing beam-database magic"));
        }
        let version = parts.next().unwrap_or("");
        if version != BEAMDB_FILE_VERSION.to_string() {
            return Err(Error::Version {
                kind: "beam database",
                found: version.to_string(),
                expected: BEAMDB_FILE_VERSION,
            });
        }
        let config_hash = lines.keyed("config_hash")?;
        let seed = lines
            .keyed("seed")?
            .parse()
            .map_err(|_| lines.error("seed is not an integer"))?;
        let agent = lines.keyed("agent")?;
        let utilization_prob = lines
            .keyed("utilization_prob")?
            .parse()
            .map_err(|_| lines.error("bad utilization_prob"))?;
        let shape: Vec<usize> = lines
            .keyed("shape")?
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| lines.error("bad shape"))?;
        let [n, dc] = shape[..] else {
            return Err(lines.error("shape needs two values"));
        };
        lines.expect("bin rank theta_deg phi_deg rsp_dbm")?;
        let mut bins = Vec::with_capacity(n);
        for i in 0..n {
            let mut list = Vec::with_capacity(dc);
            for r in 0..dc {
                let v = lines.floats(5)?;
                if v[0] != (i + 1) as f64 || v[1] != (r + 1) as f64 {
                    return Err(lines.error("rows out of order"));
                }
                list.push(Candidate {
                    beam: BeamDirection::new(v[2], v[3]),
                    rsp_dbm: v[4],
                });
            }
            bins.push(list);
        }
        lines.expect("end")?;
        let db = Self::from_entries(bins, utilization_prob).map_err(|e| lines.error(&e.to_string()))?;
        Ok((
            db,
            WeightMeta {
                config_hash,
                seed,
                agent,
            },
        ))
    }
}

/// Rides the greedy rollout of `q` and, at each bin, materialises the
/// `candidates` highest-valued actions by applying them to the incumbent beam.
/// Each candidate is measured and the list is sorted by measured power. The
/// incumbent then advances along the greedy action, so `candidates = 1`
/// reproduces the greedy policy.
pub fn build_database(
    env: &Environment,
    actions: &dyn BeamActions,
    q: &dyn QFunction,
    candidates: usize,
    utilization_prob: f64,
) -> Result<BeamDatabase> {
    if candidates == 0 || candidates > actions.len() {
        return Err(Error::InvalidConfig(format!(
            "candidate count must lie in 1..={}, got {candidates}",
            actions.len()
        )));
    }
    let mut bins = Vec::with_capacity(env.bin_count());
    let mut s = env.reset();
    while !env.is_done(&s) {
        let qs = q.q_values(env, s.bin)?;
        if qs.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                expected: actions.len(),
                got: qs.len(),
            });
        }
        let mut order: Vec<usize> = (0..qs.len()).collect();
        // stable sort keeps the lower action index first among equal values
        order.sort_by(|&a, &b| qs[b].total_cmp(&qs[a]));
        debug_assert_eq!(order[0], argmax(&qs));
        let i = s.bin - 1;
        let list = order[..candidates]
            .iter()
            .map(|&a| {
                let beam = env.config().steering.clamp(actions.apply(s.beam, a));
                Candidate {
                    beam,
                    rsp_dbm: env.rsp_dbm(i, beam),
                }
            })
            .collect();
        bins.push(list);
        s = env.step_to(&s, actions.apply(s.beam, order[0]))?.next_state;
    }
    BeamDatabase::from_entries(bins, utilization_prob)
}

/// Per-bin reward statistics over repeated passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycles: usize,
    pub positions_m: Vec<f64>,
    pub mean_db: Vec<f64>,
    pub std_db: Vec<f64>,
    pub ci_low_db: Vec<f64>,
    pub ci_high_db: Vec<f64>,
}

impl CycleStats {
    /// Mean, sample standard deviation and normal-approximation 95% interval
    /// of `samples[bin][cycle]`.
    pub fn from_samples(positions_m: Vec<f64>, samples: &[Vec<f64>]) -> Result<Self> {
        if positions_m.len() != samples.len() {
            return Err(Error::LengthMismatch {
                expected: positions_m.len(),
                got: samples.len(),
            });
        }
        let cycles = samples.first().map_or(0, Vec::len);
        if cycles == 0 {
            return Err(Error::EmptyBatch);
        }
        let m = cycles as f64;
        let (mut mean_db, mut std_db, mut ci_low_db, mut ci_high_db) = (vec![], vec![], vec![], vec![]);
        for s in samples {
            let mean = s.iter().sum::<f64>() / m;
            let std = if cycles > 1 {
                (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = Z_95 * std / m.sqrt();
            mean_db.push(mean);
            std_db.push(std);
            ci_low_db.push(mean - half);
            ci_high_db.push(mean + half);
        }
        Ok(Self {
            cycles,
            positions_m,
            mean_db,
            std_db,
            ci_low_db,
            ci_high_db,
        })
    }

    pub fn overall_mean_db(&self) -> f64 {
        self.mean_db.iter().sum::<f64>() / self.mean_db.len().max(1) as f64
    }

    pub fn overall_std_db(&self) -> f64 {
        self.std_db.iter().sum::<f64>() / self.std_db.len().max(1) as f64
    }
}

/// Runs `cycles` passes over the rail using `db`. At each bin the best entry
/// is used with the database's utilisation probability, otherwise one of the
/// other entries uniformly at random; the measured power overwrites that
/// entry's record. Returns reward statistics against the benchmark beam and
/// the updated database.
pub fn run_test_cycles(
    db: &BeamDatabase,
    env: &Environment,
    cycles: usize,
    seed: u64,
) -> Result<(CycleStats, BeamDatabase)> {
    if cycles == 0 {
        return Err(Error::InvalidConfig("cycle count must be >= 1".into()));
    }
    if db.bin_count() != env.bin_count() {
        return Err(Error::LengthMismatch {
            expected: env.bin_count(),
            got: db.bin_count(),
        });
    }
    let dc = db.candidates_per_bin();
    let p1 = db.utilization_prob;
    if dc == 1 && p1 < 1.0 {
        return Err(Error::InvalidConfig(
            "exploration needs at least two candidates per bin (or utilization probability 1)".into(),
        ));
    }
    let mut db = db.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![Vec::with_capacity(cycles); env.bin_count()];
    for _ in 0..cycles {
        for (i, bin_samples) in samples.iter_mut().enumerate() {
            let rank = if rng.gen::<f64>() < p1 {
                0
            } else {
                1 + rng.gen_range(0..dc - 1)
            };
            let beam = db.entries(i)[rank].beam;
            let rsp = env.rsp_dbm(i, beam);
            bin_samples.push(rsp - env.benchmark_rsp_dbm(i));
            db.record(i, rank, rsp);
        }
    }
    Ok((CycleStats::from_samples(env.positions_m().to_vec(), &samples)?, db))
}
