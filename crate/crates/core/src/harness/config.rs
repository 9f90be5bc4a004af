//! Experiment configuration, loaded from TOML.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::a2c::TrainerConfig;
use crate::baselines::{Decision, EvalContext, StrategyDescriptor, StrategyKind};
use crate::env::Evaluator;
use crate::error::{Error, Result};
use crate::gob::{enumerate_subsets, esb_select, GridOfBeams, SubsetConstraint};
use crate::mdp::{ActionSpace, PowerLevels, RewardConfig};
use crate::netsim::SimConfig;

/// The configuration shipped with the crate; every default in one file.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub name: String,
    pub kind: StrategyKind,
    /// Per-strategy override of the subset constraint; only meaningful for `esb_fixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<SubsetConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub n_ue: Vec<usize>,
    pub n_seeds: u64,
    pub seed_offset: u64,
    /// Names from `strategies` to run; `None` runs them all. Not part of the hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_strategies: Option<Vec<String>>,
    /// Greedy closed-loop rounds when evaluating a trained policy; the last one is reported.
    pub eval_rounds: usize,
    /// Treat every round as a one-step episode (no bootstrapping across rounds).
    pub terminal_rounds: bool,
    /// Training records are emitted once per block of this many episodes.
    pub record_every: usize,
    pub grid: GridOfBeams,
    pub constraint: SubsetConstraint,
    pub power: PowerLevels,
    pub reward: RewardConfig,
    pub sim: SimConfig,
    pub trainer: TrainerConfig,
    pub strategies: Vec<StrategyConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let strategy = |name: &str, kind, constraint| StrategyConfig { name: name.into(), kind, constraint };
        Self {
            experiment_id: "gob-a2c".into(),
            master_seed: 2024,
            output_dir: PathBuf::from("results"),
            n_ue: vec![5, 10, 15, 20],
            n_seeds: 40,
            seed_offset: 0,
            run_strategies: None,
            eval_rounds: 3,
            terminal_rounds: true,
            record_every: 10,
            grid: GridOfBeams::new(vec![-15.0, -45.0, -60.0], vec![0.0, 45.0, 90.0, 135.0, 180.0])
                .expect("valid default grid"),
            constraint: SubsetConstraint::new(1, 3),
            power: PowerLevels::default(),
            reward: RewardConfig::default(),
            sim: SimConfig::default(),
            trainer: TrainerConfig::default(),
            strategies: vec![
                strategy("A2C", StrategyKind::A2cFull, None),
                strategy("A2C-P", StrategyKind::A2cPowerOnly, None),
                strategy("A2C-B", StrategyKind::A2cBeamOnly, None),
                strategy("ESB-3", StrategyKind::EsbFixed, None),
                strategy("ESB-15", StrategyKind::EsbFixed, Some(SubsetConstraint::new(3, 5))),
            ],
        }
    }
}

/// The part of a config that identifies an experiment, independent of which
/// slice of the (strategy, N_UE, seed) grid a run covers.
#[derive(Serialize)]
struct HashedView<'a> {
    experiment_id: &'a str,
    master_seed: u64,
    eval_rounds: usize,
    terminal_rounds: bool,
    record_every: usize,
    grid: &'a GridOfBeams,
    constraint: &'a SubsetConstraint,
    power: &'a PowerLevels,
    reward: &'a RewardConfig,
    sim: &'a SimConfig,
    trainer: &'a TrainerConfig,
    strategies: &'a [StrategyConfig],
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn shipped() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.experiment_id.trim().is_empty() {
            return bad("experiment_id must not be empty".into());
        }
        if self.n_ue.is_empty() || self.n_ue.contains(&0) {
            return bad("n_ue must list at least one positive UE count".into());
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1".into());
        }
        if self.eval_rounds == 0 || self.record_every == 0 {
            return bad("eval_rounds and record_every must be at least 1".into());
        }
        self.constraint.validate(&self.grid)?;
        self.power.validate()?;
        self.reward.validate()?;
        self.sim.validate()?;
        self.trainer.validate()?;
        if self.strategies.is_empty() {
            return bad("strategy list is empty".into());
        }
        let mut names = HashSet::new();
        for s in &self.strategies {
            if s.name.trim().is_empty() {
                return bad("strategy names must not be empty".into());
            }
            if !names.insert(s.name.as_str()) {
                return bad(format!("duplicate strategy name {:?}", s.name));
            }
            if let Some(c) = s.constraint {
                if s.kind != StrategyKind::EsbFixed {
                    return bad(format!("strategy {:?}: only esb_fixed accepts a constraint override", s.name));
                }
                c.validate(&self.grid)?;
            }
        }
        if let Some(run) = &self.run_strategies {
            if run.is_empty() {
                return bad("run_strategies selects no strategy".into());
            }
            if let Some(n) = run.iter().find(|n| self.strategy(n).is_none()) {
                return bad(format!("unknown strategy {n:?} in run_strategies"));
            }
        }
        // cold start and the fixed-power strategies all use the zero offset
        let needs_zero = self.strategies.iter().any(|s| s.kind != StrategyKind::Oracle && s.kind != StrategyKind::Random);
        if needs_zero && self.power.zero_delta_index().is_none() {
            return bad("power offsets must contain 0 dB for fixed-power strategies and the cold start".into());
        }
        Ok(())
    }

    /// Short stable digest of [`HashedView`].
    pub fn config_hash(&self) -> String {
        let view = HashedView {
            experiment_id: &self.experiment_id,
            master_seed: self.master_seed,
            eval_rounds: self.eval_rounds,
            terminal_rounds: self.terminal_rounds,
            record_every: self.record_every,
            grid: &self.grid,
            constraint: &self.constraint,
            power: &self.power,
            reward: &self.reward,
            sim: &self.sim,
            trainer: &self.trainer,
            strategies: &self.strategies,
        };
        let json = serde_json::to_string(&view).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        self.seed_offset..self.seed_offset + self.n_seeds
    }

    /// The strategies a run covers, in config order.
    pub fn selected_strategies(&self) -> impl Iterator<Item = &StrategyConfig> + '_ {
        self.strategies
            .iter()
            .filter(|s| self.run_strategies.as_ref().map_or(true, |run| run.contains(&s.name)))
    }

    pub fn strategy(&self, name: &str) -> Option<&StrategyConfig> {
        self.strategies.iter().find(|s| s.name == name)
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator {
            sim: self.sim,
            power: self.power.clone(),
            reward: self.reward,
        }
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        Ok(ActionSpace {
            family: enumerate_subsets(&self.grid, self.constraint)?,
            power: self.power.clone(),
        })
    }

    fn zero_delta(&self) -> Result<usize> {
        self.power
            .zero_delta_index()
            .ok_or_else(|| Error::InvalidConfig("power offsets lack 0 dB".into()))
    }

    pub fn cold_start(&self) -> Result<Decision> {
        Ok(Decision::new(esb_select(&self.grid, self.constraint)?, self.zero_delta()?, None))
    }

    pub fn eval_context(&self) -> Result<EvalContext> {
        Ok(EvalContext {
            evaluator: self.evaluator(),
            space: self.action_space()?,
            cold_start: self.cold_start()?,
            terminal_rounds: self.terminal_rounds,
            eval_rounds: self.eval_rounds,
            seed: self.master_seed,
        })
    }

    pub fn descriptor(&self, strategy: &StrategyConfig) -> Result<StrategyDescriptor> {
        let esb = |c: SubsetConstraint| esb_select(&self.grid, c);
        Ok(match strategy.kind {
            StrategyKind::A2cFull => StrategyDescriptor::full(),
            StrategyKind::A2cPowerOnly => StrategyDescriptor::power_only(esb(self.constraint)?),
            StrategyKind::A2cBeamOnly => StrategyDescriptor::beam_only(self.zero_delta()?),
            StrategyKind::EsbFixed => {
                let c = strategy.constraint.unwrap_or(self.constraint);
                StrategyDescriptor::esb_fixed(esb(c)?, self.zero_delta()?)
            }
            StrategyKind::Random => StrategyDescriptor::random(),
            StrategyKind::Oracle => StrategyDescriptor::oracle(),
        })
    }
}
