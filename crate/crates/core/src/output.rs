//! CSV artefacts. Every file starts with a `# config_hash=... seed=...`
//! provenance line, then a header row; numbers use `.` as decimal separator
//! and the shortest representation that round-trips.

use std::io::Write;

use crate::agents::TrainReport;
use crate::beamdb::CycleStats;
use crate::error::{Error, Result};
use crate::oracle::OracleResult;

#[derive(Debug, Clone, Copy)]
pub struct Provenance<'a> {
    pub config_hash: &'a str,
    pub seed: Option<u64>,
    pub agent: Option<&'a str>,
}

impl Provenance<'_> {
    pub fn comment(&self) -> String {
        let mut s = format!("# config_hash={}", self.config_hash);
        if let Some(seed) = self.seed {
            s.push_str(&format!(" seed={seed}"));
        }
        if let Some(agent) = self.agent {
            s.push_str(&format!(" agent={agent}"));
        }
        s
    }
}

pub fn write_csv<W: Write>(mut w: W, prov: &Provenance, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", prov.comment())?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::LengthMismatch {
                expected: header.len(),
                got: row.len(),
            });
        }
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub const RSP_HEADER: [&str; 7] = ["bin", "position_m", "theta_deg", "phi_deg", "rsp_dbm", "fba_rsp_dbm", "reward_db"];

/// Received power along the rail for one agent.
pub fn write_rsp_csv<W: Write>(w: W, prov: &Provenance, r: &TrainReport) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..r.policy.len())
        .map(|i| {
            vec![
                (i + 1) as f64,
                r.positions_m[i],
                r.policy[i].theta_deg,
                r.policy[i].phi_deg,
                r.rsp_dbm[i],
                r.benchmark_rsp_dbm[i],
                r.rsp_dbm[i] - r.benchmark_rsp_dbm[i],
            ]
        })
        .collect();
    write_csv(w, prov, &RSP_HEADER, &rows)
}

pub const POLICY_HEADER: [&str; 5] = ["bin", "position_m", "action_id", "theta_deg", "phi_deg"];

/// Final per-bin policy; `action_id` is one-based.
pub fn write_policy_csv<W: Write>(w: W, prov: &Provenance, r: &TrainReport) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..r.policy.len())
        .map(|i| {
            vec![
                (i + 1) as f64,
                r.positions_m[i],
                r.actions.get(i).map_or(0.0, |a| (a + 1) as f64),
                r.policy[i].theta_deg,
                r.policy[i].phi_deg,
            ]
        })
        .collect();
    write_csv(w, prov, &POLICY_HEADER, &rows)
}

/// One column of received power per agent, on the positions of `base`.
/// Agents run on a finer grid are sampled at the matching positions.
pub fn write_comparison_csv<W: Write>(w: W, prov: &Provenance, base: &[f64], agents: &[(&str, &TrainReport)]) -> Result<()> {
    let names: Vec<String> = agents.iter().map(|(n, _)| format!("rsp_{n}_dbm")).collect();
    let mut header = vec!["position_m"];
    header.extend(names.iter().map(String::as_str));
    let mut columns = Vec::with_capacity(agents.len());
    for (name, r) in agents {
        let mut col = Vec::with_capacity(base.len());
        let mut j = 0;
        for &x in base {
            while j < r.positions_m.len() && r.positions_m[j] < x - 1e-9 {
                j += 1;
            }
            match r.positions_m.get(j) {
                Some(p) if (p - x).abs() <= 1e-9 => col.push(r.rsp_dbm[j]),
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "agent {name} has no bin at position {x} m"
                    )))
                }
            }
        }
        columns.push(col);
    }
    let rows: Vec<Vec<f64>> = base
        .iter()
        .enumerate()
        .map(|(i, &x)| std::iter::once(x).chain(columns.iter().map(|c| c[i])).collect())
        .collect();
    write_csv(w, prov, &header, &rows)
}

pub const CYCLES_HEADER: [&str; 5] = ["position_m", "mean_db", "std_db", "ci_low_db", "ci_high_db"];

pub fn write_cycles_csv<W: Write>(w: W, prov: &Provenance, s: &CycleStats) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..s.mean_db.len())
        .map(|i| vec![s.positions_m[i], s.mean_db[i], s.std_db[i], s.ci_low_db[i], s.ci_high_db[i]])
        .collect();
    write_csv(w, prov, &CYCLES_HEADER, &rows)
}

pub const ORACLE_HEADER: [&str; 4] = ["bin", "theta_deg", "phi_deg", "rsp_dbm"];

pub fn write_oracle_csv<W: Write>(w: W, prov: &Provenance, r: &OracleResult) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..r.best_beams.len())
        .map(|i| {
            vec![
                (i + 1) as f64,
                r.best_beams[i].theta_deg,
                r.best_beams[i].phi_deg,
                r.best_rsp_dbm[i],
            ]
        })
        .collect();
    write_csv(w, prov, &ORACLE_HEADER, &rows)
}

/// Parses a file written by [`write_csv`] back into header and numeric rows,
/// skipping `#` comment lines.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    let header: Vec<String> = match lines.next() {
        Some((_, l)) => l.split(',').map(str::to_string).collect(),
        None => {
            return Err(Error::Format {
                kind: "csv",
                line: 0,
                message: "missing header".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (n, l) in lines {
        let row = l
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                kind: "csv",
                line: n + 1,
                message: e.to_string(),
            })?;
        if row.len() != header.len() {
            return Err(Error::Format {
                kind: "csv",
                line: n + 1,
                message: format!("expected {} columns, found {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}
