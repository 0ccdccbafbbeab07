use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use railbeam_core::agents::{AgentKind, TrainReport};
use railbeam_core::beamdb::run_test_cycles;
use railbeam_core::config::ExperimentConfig;
use railbeam_core::experiment::{database_for, environment_for, evaluate, run_agent, AgentRun, TrainedModel};
use railbeam_core::link::LinkTable;
use railbeam_core::nn::WeightMeta;
use railbeam_core::oracle::grid_search;
use railbeam_core::output::{
    write_comparison_csv, write_cycles_csv, write_oracle_csv, write_policy_csv, write_rsp_csv, Provenance,
};

use crate::{Common, UsageError};

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let out = common.out.clone().unwrap_or_else(|| cfg.experiment.out_dir.clone());
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let hash = cfg.config_hash();
        Ok(Self { cfg, hash, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seeds(&self, common: &Common) -> Vec<u64> {
        if common.seeds.is_empty() {
            self.cfg.experiment.seeds.clone()
        } else {
            common.seeds.clone()
        }
    }

    fn prov<'a>(&'a self, seed: Option<u64>, agent: Option<&'a str>) -> Provenance<'a> {
        Provenance {
            config_hash: &self.hash,
            seed,
            agent,
        }
    }
}

fn parse_agents(names: &[String]) -> Result<Vec<AgentKind>> {
    names
        .iter()
        .map(|n| n.parse::<AgentKind>().map_err(|e| UsageError(e.to_string()).into()))
        .collect()
}

/// Exactly one agent and one seed, for the single-run commands.
fn single(common: &Common, ctx: &Ctx) -> Result<(AgentKind, u64)> {
    let agents = parse_agents(&common.agents)?;
    let agent = match agents.as_slice() {
        [a] => *a,
        [] => return Err(UsageError("--agent is required".into()).into()),
        _ => return Err(UsageError("this command takes a single --agent".into()).into()),
    };
    let seeds = ctx.seeds(common);
    let seed = match seeds.as_slice() {
        [s] => *s,
        [s, ..] if common.seeds.is_empty() => *s,
        _ => return Err(UsageError("this command takes a single --seed".into()).into()),
    };
    Ok((agent, seed))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

fn stem(agent: AgentKind, seed: u64) -> String {
    format!("{agent}_seed{seed}")
}

fn model_path(ctx: &Ctx, agent: AgentKind, seed: u64) -> Result<PathBuf> {
    match TrainedModel::extension(agent) {
        Some(ext) => Ok(ctx.path(&format!("{}.{ext}", stem(agent, seed)))),
        None => Err(UsageError(format!("agent {agent} has no model file")).into()),
    }
}

fn timed_run(cfg: &ExperimentConfig, agent: AgentKind, seed: u64) -> Result<AgentRun> {
    let start = Instant::now();
    let mut run = run_agent(cfg, agent, seed).with_context(|| format!("running {agent} with seed {seed}"))?;
    run.report.wall_clock_s = start.elapsed().as_secs_f64();
    info!(
        "{agent} seed {seed}: average reward {:.3} dB ({:.1} s)",
        run.report.average_reward_db, run.report.wall_clock_s
    );
    Ok(run)
}

fn save_model(ctx: &Ctx, run: &AgentRun, agent: AgentKind, seed: u64) -> Result<()> {
    if TrainedModel::extension(agent).is_none() {
        return Ok(());
    }
    let path = model_path(ctx, agent, seed)?;
    let meta = WeightMeta {
        config_hash: ctx.hash.clone(),
        seed,
        agent: agent.name().to_string(),
    };
    let mut w = create(&path)?;
    run.model.save(&mut w, &meta)?;
    w.flush()?;
    Ok(())
}

fn write_rsp(ctx: &Ctx, name: &str, report: &TrainReport) -> Result<()> {
    let mut w = create(&ctx.path(name))?;
    write_rsp_csv(&mut w, &ctx.prov(Some(report.seed), Some(report.agent.name())), report)?;
    w.flush()?;
    Ok(())
}

pub fn simulate(common: &Common) -> Result<()> {
    let ctx = Ctx::new(common)?;
    let agents = if common.agents.is_empty() {
        ctx.cfg.experiment.agents.clone()
    } else {
        parse_agents(&common.agents)?
    };
    if agents.is_empty() {
        bail!(UsageError("no agents to run".into()));
    }
    let seeds = ctx.seeds(common);
    let jobs: Vec<(AgentKind, u64)> = seeds
        .iter()
        .flat_map(|&s| agents.iter().map(move |&a| (a, s)))
        .collect();
    let start = Instant::now();
    let runs: Vec<AgentRun> = jobs
        .par_iter()
        .map(|&(a, s)| timed_run(&ctx.cfg, a, s))
        .collect::<Result<_>>()?;

    let base = ctx.cfg.environment()?.positions_m().to_vec();
    for (si, &seed) in seeds.iter().enumerate() {
        let batch = &runs[si * agents.len()..(si + 1) * agents.len()];
        for run in batch {
            write_rsp(&ctx, &format!("rsp_{}.csv", stem(run.report.agent, seed)), &run.report)?;
        }
        let cols: Vec<(&str, &TrainReport)> = batch.iter().map(|r| (r.report.agent.name(), &r.report)).collect();
        let mut w = create(&ctx.path(&format!("comparison_seed{seed}.csv")))?;
        write_comparison_csv(&mut w, &ctx.prov(Some(seed), None), &base, &cols)?;
        w.flush()?;
    }

    let per_agent: Vec<serde_json::Value> = agents
        .iter()
        .enumerate()
        .map(|(ai, &a)| {
            let rewards: Vec<f64> = (0..seeds.len())
                .map(|si| runs[si * agents.len() + ai].report.average_reward_db)
                .collect();
            let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
            json!({
                "agent": a.name(),
                "average_reward_db": rewards,
                "mean_average_reward_db": mean,
            })
        })
        .collect();
    let summary = json!({
        "config_hash": ctx.hash,
        "seeds": seeds,
        "agents": per_agent,
    });
    let mut w = create(&ctx.path("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    info!("simulate finished in {:.1} s", start.elapsed().as_secs_f64());
    for a in summary["agents"].as_array().into_iter().flatten() {
        println!("{:<14} {:>8.3} dB", a["agent"].as_str().unwrap_or(""), a["mean_average_reward_db"].as_f64().unwrap_or(f64::NAN));
    }
    Ok(())
}

pub fn train(common: &Common) -> Result<()> {
    let ctx = Ctx::new(common)?;
    let (agent, seed) = single(common, &ctx)?;
    let run = timed_run(&ctx.cfg, agent, seed)?;
    let name = stem(agent, seed);
    save_model(&ctx, &run, agent, seed)?;
    let mut w = create(&ctx.path(&format!("{name}_report.json")))?;
    serde_json::to_writer_pretty(&mut w, &run.report)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = create(&ctx.path(&format!("{name}_policy.csv")))?;
    write_policy_csv(&mut w, &ctx.prov(Some(seed), Some(agent.name())), &run.report)?;
    w.flush()?;
    write_rsp(&ctx, &format!("rsp_{name}.csv"), &run.report)?;
    println!("{agent} seed {seed}: average reward {:.3} dB", run.report.average_reward_db);
    Ok(())
}

fn load_model(ctx: &Ctx, agent: AgentKind, path: &Path) -> Result<TrainedModel> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (model, meta) =
        TrainedModel::load(agent, BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    if meta.agent != agent.name() {
        bail!(UsageError(format!(
            "{} holds a {} model, not {agent}",
            path.display(),
            meta.agent
        )));
    }
    if meta.config_hash != ctx.hash {
        warn!("{} was trained under a different configuration", path.display());
    }
    Ok(model)
}

pub fn eval(common: &Common, model: Option<PathBuf>) -> Result<()> {
    let ctx = Ctx::new(common)?;
    let (agent, seed) = single(common, &ctx)?;
    let path = match model {
        Some(p) => p,
        None => model_path(&ctx, agent, seed)?,
    };
    let model = load_model(&ctx, agent, &path)?;
    let report = evaluate(&ctx.cfg, agent, &model, seed)?;
    write_rsp(&ctx, &format!("{}_eval.csv", stem(agent, seed)), &report)?;
    println!("{agent} seed {seed}: greedy average reward {:.3} dB", report.average_reward_db);
    Ok(())
}

pub fn oracle(common: &Common) -> Result<()> {
    let ctx = Ctx::new(common)?;
    let cfg = &ctx.cfg;
    let table = LinkTable::new(&cfg.scenario, &cfg.panels(), cfg.env.tx_beam)?;
    let start = Instant::now();
    let result = grid_search(&table, &cfg.env.steering, &cfg.oracle)?;
    info!(
        "oracle: {} evaluations in {:.1} s",
        result.evaluations,
        start.elapsed().as_secs_f64()
    );
    let mut w = create(&ctx.path("oracle_golden.csv"))?;
    write_oracle_csv(&mut w, &ctx.prov(None, None), &result)?;
    w.flush()?;
    let gap: Vec<f64> = (0..table.len())
        .map(|i| result.best_rsp_dbm[i] - table.rsp_dbm(i, cfg.env.benchmark))
        .collect();
    println!(
        "oracle: mean gain over the fixed beam {:.3} dB across {} bins",
        gap.iter().sum::<f64>() / gap.len() as f64,
        gap.len()
    );
    Ok(())
}

pub fn cycles(common: &Common, model: Option<PathBuf>) -> Result<()> {
    let ctx = Ctx::new(common)?;
    let (agent, seed) = single(common, &ctx)?;
    let path = match model {
        Some(p) => p,
        None => model_path(&ctx, agent, seed)?,
    };
    let trained = if path.exists() {
        load_model(&ctx, agent, &path)?
    } else {
        info!("{} not found; training {agent} with seed {seed}", path.display());
        let run = timed_run(&ctx.cfg, agent, seed)?;
        save_model(&ctx, &run, agent, seed)?;
        run.model
    };
    let name = stem(agent, seed);
    let db = database_for(&ctx.cfg, agent, &trained)?;
    let meta = WeightMeta {
        config_hash: ctx.hash.clone(),
        seed,
        agent: agent.name().to_string(),
    };
    let mut w = create(&ctx.path(&format!("{name}.beamdb")))?;
    db.save(&mut w, &meta)?;
    w.flush()?;
    let env = environment_for(&ctx.cfg, agent)?;
    let (stats, _) = run_test_cycles(&db, &env, ctx.cfg.database.cycles, seed)?;
    let mut w = create(&ctx.path(&format!("{name}_cycles.csv")))?;
    write_cycles_csv(&mut w, &ctx.prov(Some(seed), Some(agent.name())), &stats)?;
    w.flush()?;
    println!(
        "{agent} seed {seed}: {} cycles, mean {:.3} dB, mean std {:.3} dB",
        stats.cycles,
        stats.overall_mean_db(),
        stats.overall_std_db()
    );
    Ok(())
}
