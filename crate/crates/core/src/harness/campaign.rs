//! Seeded multi-run campaigns over (strategy, N_UE, seed) triples.

use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StrategyConfig};
use super::record::{to_canonical_line, BlockMeans, FailureRecord, Phase, ResultRecord, RoundMetrics};
use crate::a2c::{train, Agent, Environment, TrainerConfig};
use crate::baselines::{evaluate_on, restrict_action_space, Choice, Decision, StrategyDescriptor};
use crate::env::{BeamEnv, Outcome};
use crate::error::{Error, Result};
use crate::mdp::{encode_action, ActionDims};
use crate::netsim::{generate_scenario, Scenario};
use crate::seeds::{derive_seed, name_key};

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "BEAMSEL_WORKERS";

const SCENARIO_KEY: u64 = 0x5ce7_a210;

pub const RECORDS_DIR: &str = "records";
pub const FAILURES_DIR: &str = "failures";
pub const CHECKPOINTS_DIR: &str = "checkpoints";

/// Which slice of the configured grid to run; `None` keeps the config's list.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub strategies: Option<Vec<String>>,
    pub n_ue: Option<Vec<usize>>,
    pub seed_offset: Option<u64>,
}

impl Selection {
    /// Applies the filters, rejecting names or UE counts the config does not know.
    pub fn apply(&self, cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        if let Some(names) = &self.strategies {
            out.run_strategies = Some(names.clone());
        }
        if let Some(n_ue) = &self.n_ue {
            out.n_ue = n_ue.clone();
        }
        if let Some(offset) = self.seed_offset {
            out.seed_offset = offset;
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub strategy: String,
    pub n_ue: usize,
    pub seed: u64,
}

impl Triple {
    pub fn shard_name(&self) -> String {
        let safe: String = self
            .strategy
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        format!("{safe}__n{}__s{}", self.n_ue, self.seed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub completed: Vec<Triple>,
    pub skipped: Vec<Triple>,
    pub failed: Vec<(Triple, String)>,
    pub interrupted: Vec<Triple>,
}

pub fn scenario_seed(cfg: &ExperimentConfig, n_ue: usize, seed: u64) -> u64 {
    derive_seed(cfg.master_seed, &[SCENARIO_KEY, n_ue as u64, seed])
}

pub fn agent_seed(cfg: &ExperimentConfig, strategy: &str, n_ue: usize, seed: u64) -> u64 {
    derive_seed(cfg.master_seed, &[name_key(strategy), n_ue as u64, seed, cfg.trainer.rng_seed])
}

/// The frozen scenario shared by every strategy for `(n_ue, seed)`.
pub fn campaign_scenario(cfg: &ExperimentConfig, n_ue: usize, seed: u64) -> Result<Scenario> {
    generate_scenario(&cfg.sim, n_ue, scenario_seed(cfg, n_ue, seed))
}

pub fn triples(cfg: &ExperimentConfig) -> Vec<Triple> {
    let mut out = Vec::new();
    for s in cfg.selected_strategies() {
        for &n_ue in &cfg.n_ue {
            for seed in cfg.seeds() {
                out.push(Triple { strategy: s.name.clone(), n_ue, seed });
            }
        }
    }
    out
}

pub fn shard_path(out_dir: &Path, triple: &Triple) -> PathBuf {
    out_dir.join(RECORDS_DIR).join(format!("{}.jsonl", triple.shard_name()))
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// A shard counts as complete when its first record carries this config's hash.
fn shard_is_complete(path: &Path, hash: &str) -> Result<bool> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(false);
    };
    let Some(first) = text.lines().next() else {
        return Ok(false);
    };
    let rec: ResultRecord = serde_json::from_str(first)?;
    if rec.config_hash != hash {
        return Err(Error::InvalidConfig(format!(
            "{} was written by config {}, not {hash}",
            path.display(),
            rec.config_hash
        )));
    }
    Ok(true)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().expect("shard paths have a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(content.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs every selected triple not already on disk. `stop` interrupts learned
/// runs between episodes; their agents are checkpointed and the triple is
/// left incomplete so a later call reruns it.
pub fn run_campaign(cfg: &ExperimentConfig, stop: Option<&AtomicBool>) -> Result<CampaignReport> {
    cfg.validate()?;
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir.join(RECORDS_DIR)).map_err(|e| Error::io(out_dir, e))?;
    let hash = cfg.config_hash();
    let work = triples(cfg);

    let run_one = |t: &Triple| -> (Triple, Result<Status>) {
        let path = shard_path(out_dir, t);
        let res = (|| {
            if shard_is_complete(&path, &hash)? {
                return Ok(Status::Skipped);
            }
            let strategy = cfg.strategy(&t.strategy).expect("triples come from the config");
            match run_triple(cfg, &hash, strategy, t.n_ue, t.seed, stop)? {
                TripleRun::Done(lines) => {
                    write_atomic(&path, &lines)?;
                    // leftovers from an earlier failed or interrupted attempt
                    for stale in [
                        out_dir.join(FAILURES_DIR).join(format!("{}.json", t.shard_name())),
                        out_dir.join(CHECKPOINTS_DIR).join(format!("{}.json", t.shard_name())),
                    ] {
                        let _ = std::fs::remove_file(stale);
                    }
                    Ok(Status::Completed)
                }
                TripleRun::Interrupted(agent) => {
                    let ckpt = out_dir.join(CHECKPOINTS_DIR).join(format!("{}.json", t.shard_name()));
                    std::fs::create_dir_all(ckpt.parent().unwrap()).map_err(|e| Error::io(&ckpt, e))?;
                    agent.checkpoint().save(&ckpt)?;
                    Ok(Status::Interrupted)
                }
            }
        })();
        (t.clone(), res)
    };

    let results: Vec<(Triple, Result<Status>)> = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(|| work.par_iter().map(run_one).collect()),
        None => work.par_iter().map(run_one).collect(),
    };

    let mut report = CampaignReport::default();
    for (t, res) in results {
        match res {
            Ok(Status::Completed) => report.completed.push(t),
            Ok(Status::Skipped) => report.skipped.push(t),
            Ok(Status::Interrupted) => report.interrupted.push(t),
            Err(e) => {
                let failure = FailureRecord {
                    experiment_id: cfg.experiment_id.clone(),
                    config_hash: hash.clone(),
                    strategy: t.strategy.clone(),
                    n_ue: t.n_ue,
                    seed: t.seed,
                    error_kind: e.kind().into(),
                    message: e.to_string(),
                };
                let path = out_dir.join(FAILURES_DIR).join(format!("{}.json", t.shard_name()));
                write_atomic(&path, &(to_canonical_line(&failure)? + "\n"))?;
                report.failed.push((t, e.to_string()));
            }
        }
    }
    Ok(report)
}

enum Status {
    Completed,
    Skipped,
    Interrupted,
}

enum TripleRun {
    Done(String),
    Interrupted(Box<Agent>),
}

struct RecordWriter<'a> {
    cfg: &'a ExperimentConfig,
    hash: &'a str,
    strategy: &'a StrategyConfig,
    n_ue: usize,
    seed: u64,
    dims: ActionDims,
    out: String,
}

impl RecordWriter<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        phase: Phase,
        index: usize,
        is_final: bool,
        local_action: usize,
        decision: &Decision,
        outcome: &Outcome,
        block: Option<BlockMeans>,
    ) -> Result<()> {
        let flat_action = decision.action.map(|a| encode_action(a, self.dims)).transpose()?;
        let round = &outcome.round;
        let rec = ResultRecord {
            experiment_id: self.cfg.experiment_id.clone(),
            config_hash: self.hash.to_string(),
            strategy: self.strategy.name.clone(),
            strategy_kind: self.strategy.kind,
            n_ue: self.n_ue,
            seed: self.seed,
            phase,
            index,
            is_final,
            local_action,
            flat_action,
            action: decision.action,
            power_index: decision.power_index,
            active_beams: decision.subset.k_beams(),
            state: round.state(),
            reward: outcome.reward,
            metrics: RoundMetrics {
                throughput_bps: round.gnb_throughput_bps,
                tx_power_dbm: round.tx_power_dbm,
                ee_bps_per_w: round.ee_bps_per_w,
                outage_ratio: round.outage_ratio,
                coverage_pct: 100.0 * round.coverage(self.cfg.reward.outage_threshold),
            },
            block,
        };
        self.out.push_str(&to_canonical_line(&rec)?);
        self.out.push('\n');
        Ok(())
    }
}

#[derive(Default)]
struct BlockAcc {
    n: usize,
    reward: f64,
    ee_ratio: f64,
    power: f64,
    coverage: f64,
}

impl BlockAcc {
    fn add(&mut self, o: &Outcome, threshold: u8) {
        self.n += 1;
        self.reward += o.reward.reward;
        self.ee_ratio += o.reward.ee_ratio();
        self.power += o.round.tx_power_dbm;
        self.coverage += 100.0 * o.round.coverage(threshold);
    }

    fn take(&mut self) -> BlockMeans {
        let n = self.n as f64;
        let m = BlockMeans {
            episodes: self.n,
            reward: self.reward / n,
            ee_ratio: self.ee_ratio / n,
            tx_power_dbm: self.power / n,
            coverage_pct: self.coverage / n,
        };
        *self = Self::default();
        m
    }
}

/// Trains (for learned strategies) and evaluates one triple, returning its records.
fn run_triple(
    cfg: &ExperimentConfig,
    hash: &str,
    strategy: &StrategyConfig,
    n_ue: usize,
    seed: u64,
    stop: Option<&AtomicBool>,
) -> Result<TripleRun> {
    let scenario = campaign_scenario(cfg, n_ue, seed)?;
    let desc = cfg.descriptor(strategy)?;
    let mut ctx = cfg.eval_context()?;
    ctx.seed = derive_seed(cfg.master_seed, &[name_key(&strategy.name), n_ue as u64, seed]);
    let dims = ctx.space.dims();
    let mut w = RecordWriter { cfg, hash, strategy, n_ue, seed, dims, out: String::new() };

    if !strategy.kind.is_learned() {
        let choice = evaluate_on(&desc, &ctx, &scenario, None)?;
        w.push(Phase::Eval, 0, true, choice.index, &choice.decision, &choice.outcome, None)?;
        return Ok(TripleRun::Done(w.out));
    }

    let space = restrict_action_space(&desc, &ctx.space)?;
    let mut env = BeamEnv::new(ctx.evaluator.clone(), space, &scenario, ctx.cold_start.clone(), cfg.terminal_rounds)?;
    let trainer = TrainerConfig {
        rng_seed: agent_seed(cfg, &strategy.name, n_ue, seed),
        ..cfg.trainer.clone()
    };
    let mut agent = Agent::new(env.observation_dim(), env.action_count(), trainer)?;
    let threshold = cfg.reward.outage_threshold;
    let episodes = cfg.trainer.episodes;
    let mut acc = BlockAcc::default();
    let mut failure: Option<Error> = None;
    let outcome = train(&mut env, &mut agent, episodes, |ev| {
        let (index, outcome) = ev.env.last().expect("a step just ran");
        acc.add(outcome, threshold);
        if acc.n == cfg.record_every || ev.episode + 1 == episodes {
            let decision = ev.env.space().get(*index).expect("valid index");
            let block = acc.take();
            if let Err(e) = w.push(Phase::Train, ev.episode, false, *index, decision, outcome, Some(block)) {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if outcome.interrupted {
        return Ok(TripleRun::Interrupted(Box::new(agent)));
    }

    let mut features = env.reset()?;
    for round in 0..cfg.eval_rounds {
        let index = agent.greedy(&features)?;
        features = env.step(index)?.observation;
        let (_, outcome) = env.last().expect("a step just ran");
        let decision = env.space().get(index).expect("valid index");
        w.push(Phase::Eval, round, round + 1 == cfg.eval_rounds, index, decision, outcome, None)?;
    }
    Ok(TripleRun::Done(w.out))
}

/// Oracle sweep of the full action space on the campaign's scenario.
pub fn oracle_for(cfg: &ExperimentConfig, n_ue: usize, seed: u64) -> Result<Choice> {
    let scenario = campaign_scenario(cfg, n_ue, seed)?;
    evaluate_on(&StrategyDescriptor::oracle(), &cfg.eval_context()?, &scenario, None)
}

