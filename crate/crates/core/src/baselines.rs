//! Comparison strategies, their reduced action spaces, the exhaustive oracle
//! and per-strategy evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::a2c::{argmax, Environment, PolicyNetwork};
use crate::env::{BeamEnv, Evaluator, Outcome};
use crate::error::{Error, Result};
use crate::gob::BeamSubset;
use crate::mdp::{decode_action, ActionSpace, BeamAction};
use crate::netsim::{Scenario, UeLink};
use crate::seeds::derive_seed;
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    EsbFixed,
    A2cFull,
    A2cPowerOnly,
    A2cBeamOnly,
    Random,
    Oracle,
}

impl StrategyKind {
    pub fn is_learned(self) -> bool {
        matches!(self, Self::A2cFull | Self::A2cPowerOnly | Self::A2cBeamOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub kind: StrategyKind,
    pub frozen_subset: Option<BeamSubset>,
    /// 1-based power level index.
    pub frozen_delta: Option<usize>,
}

impl StrategyDescriptor {
    pub fn full() -> Self {
        Self { kind: StrategyKind::A2cFull, frozen_subset: None, frozen_delta: None }
    }

    pub fn power_only(subset: BeamSubset) -> Self {
        Self { kind: StrategyKind::A2cPowerOnly, frozen_subset: Some(subset), frozen_delta: None }
    }

    pub fn beam_only(delta: usize) -> Self {
        Self { kind: StrategyKind::A2cBeamOnly, frozen_subset: None, frozen_delta: Some(delta) }
    }

    pub fn esb_fixed(subset: BeamSubset, delta: usize) -> Self {
        Self { kind: StrategyKind::EsbFixed, frozen_subset: Some(subset), frozen_delta: Some(delta) }
    }

    pub fn random() -> Self {
        Self { kind: StrategyKind::Random, frozen_subset: None, frozen_delta: None }
    }

    pub fn oracle() -> Self {
        Self { kind: StrategyKind::Oracle, frozen_subset: None, frozen_delta: None }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_subset = matches!(self.kind, StrategyKind::A2cPowerOnly | StrategyKind::EsbFixed);
        let needs_delta = matches!(self.kind, StrategyKind::A2cBeamOnly | StrategyKind::EsbFixed);
        if needs_subset != self.frozen_subset.is_some() || needs_delta != self.frozen_delta.is_some() {
            return Err(Error::InvalidConfig(format!(
                "{:?} strategy has the wrong frozen components",
                self.kind
            )));
        }
        Ok(())
    }
}

/// A concrete subset and power level; `action` is its embedding in the full
/// space when the subset belongs to the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub subset: BeamSubset,
    pub power_index: usize,
    pub action: Option<BeamAction>,
}

impl Decision {
    pub fn new(subset: BeamSubset, power_index: usize, action: Option<BeamAction>) -> Self {
        Self { subset, power_index, action }
    }
}

/// The decisions a strategy can take, indexed from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSpace {
    decisions: Vec<Decision>,
}

impl RestrictedSpace {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Decision> {
        self.decisions.get(index)
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }
}

fn full_decisions(space: &ActionSpace) -> Result<Vec<Decision>> {
    let dims = space.dims();
    (0..dims.size())
        .map(|i| {
            let action = decode_action(i, dims)?;
            let (subset, _) = space.resolve(action)?;
            Ok(Decision::new(subset, action.n, Some(action)))
        })
        .collect()
}

pub fn restrict_action_space(desc: &StrategyDescriptor, space: &ActionSpace) -> Result<RestrictedSpace> {
    desc.validate()?;
    let n_p = space.power.len();
    if let Some(d) = desc.frozen_delta {
        if !(1..=n_p).contains(&d) {
            return Err(Error::InvalidConfig(format!("frozen power index {d} outside 1..={n_p}")));
        }
    }
    let position = |s: &BeamSubset| space.family.position(s).map(|(l, m)| (l + 1, m + 1));
    let decisions = match desc.kind {
        StrategyKind::A2cFull | StrategyKind::Random | StrategyKind::Oracle => full_decisions(space)?,
        StrategyKind::A2cPowerOnly => {
            let subset = desc.frozen_subset.clone().unwrap();
            let (l, m) = position(&subset).ok_or_else(|| {
                Error::InvalidConfig("power-only subset is not a member of the subset family".into())
            })?;
            (1..=n_p)
                .map(|n| Decision::new(subset.clone(), n, Some(BeamAction { l, m, n })))
                .collect()
        }
        StrategyKind::A2cBeamOnly => {
            let n = desc.frozen_delta.unwrap();
            full_decisions(space)?.into_iter().filter(|d| d.power_index == n).collect()
        }
        StrategyKind::EsbFixed => {
            let subset = desc.frozen_subset.clone().unwrap();
            let n = desc.frozen_delta.unwrap();
            let action = position(&subset).map(|(l, m)| BeamAction { l, m, n });
            vec![Decision::new(subset, n, action)]
        }
    };
    Ok(RestrictedSpace { decisions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub index: usize,
    pub decision: Decision,
    pub outcome: Outcome,
}

/// Exhaustive sweep; highest reward wins, ties to the lowest index.
pub fn oracle_best_action(links: &[UeLink], space: &RestrictedSpace, evaluator: &Evaluator) -> Result<Choice> {
    if space.is_empty() {
        return Err(Error::InvalidConfig("empty action space".into()));
    }
    let outcomes = space
        .decisions
        .par_iter()
        .map(|d| evaluator.evaluate(links, d))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.reward.reward > outcomes[best].reward.reward {
            best = i;
        }
    }
    Ok(Choice {
        index: best,
        decision: space.decisions[best].clone(),
        outcome: outcomes.into_iter().nth(best).unwrap(),
    })
}

/// Rounds of greedy closed-loop control from the cold-start state; returns the last one.
pub fn greedy_rollout(env: &mut BeamEnv, policy: &PolicyNetwork, rounds: usize) -> Result<Choice> {
    let mut features = env.reset()?;
    for _ in 0..rounds.max(1) {
        let index = argmax(&policy.logits(&features)?);
        let t = env.step(index)?;
        features = t.observation;
    }
    let (index, outcome) = env.last().cloned().expect("at least one round ran");
    Ok(Choice { index, decision: env.space().get(index).unwrap().clone(), outcome })
}

/// Shared inputs for evaluating strategies on scenarios.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub evaluator: Evaluator,
    pub space: ActionSpace,
    pub cold_start: Decision,
    pub terminal_rounds: bool,
    pub eval_rounds: usize,
    pub seed: u64,
}

/// What a strategy achieves on one scenario.
pub fn evaluate_on(
    desc: &StrategyDescriptor,
    ctx: &EvalContext,
    scenario: &Scenario,
    policy: Option<&PolicyNetwork>,
) -> Result<Choice> {
    let restricted = restrict_action_space(desc, &ctx.space)?;
    let links = scenario.links(&ctx.evaluator.sim)?;
    let fixed = |index: usize| -> Result<Choice> {
        let decision = restricted.decisions[index].clone();
        let outcome = ctx.evaluator.evaluate(&links, &decision)?;
        Ok(Choice { index, decision, outcome })
    };
    match desc.kind {
        StrategyKind::EsbFixed => fixed(0),
        StrategyKind::Oracle => oracle_best_action(&links, &restricted, &ctx.evaluator),
        StrategyKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.seed, &[scenario.seed]));
            fixed(rng.random_range(0..restricted.len()))
        }
        StrategyKind::A2cFull | StrategyKind::A2cPowerOnly | StrategyKind::A2cBeamOnly => {
            let policy = policy.ok_or_else(|| {
                Error::InvalidConfig(format!("{:?} needs a trained policy to evaluate", desc.kind))
            })?;
            let mut env = BeamEnv::new(
                ctx.evaluator.clone(),
                restricted,
                scenario,
                ctx.cold_start.clone(),
                ctx.terminal_rounds,
            )?;
            if env.action_count() != policy.n_actions() {
                return Err(Error::InvalidConfig("policy does not match the strategy's action space".into()));
            }
            greedy_rollout(&mut env, policy, ctx.eval_rounds)
        }
    }
}

/// Per-scenario metrics of one evaluated round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub reward: f64,
    pub ee_ratio: f64,
    pub throughput_bps: f64,
    pub power_dbm: f64,
    pub coverage_pct: f64,
}

impl ScenarioMetrics {
    pub fn of(outcome: &Outcome, outage_threshold: u8) -> Self {
        Self {
            reward: outcome.reward.reward,
            ee_ratio: outcome.reward.ee_ratio(),
            throughput_bps: outcome.round.gnb_throughput_bps,
            power_dbm: outcome.round.tx_power_dbm,
            coverage_pct: 100.0 * outcome.round.coverage(outage_threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub reward: Summary,
    pub ee_ratio: Summary,
    pub throughput_bps: Summary,
    pub power_dbm: Summary,
    pub coverage_pct: Summary,
}

impl StrategyMetrics {
    pub fn aggregate(per_scenario: &[ScenarioMetrics]) -> Option<Self> {
        let col = |f: fn(&ScenarioMetrics) -> f64| Summary::of(&per_scenario.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            reward: col(|m| m.reward)?,
            ee_ratio: col(|m| m.ee_ratio)?,
            throughput_bps: col(|m| m.throughput_bps)?,
            power_dbm: col(|m| m.power_dbm)?,
            coverage_pct: col(|m| m.coverage_pct)?,
        })
    }
}

/// Mean and 95% interval of each metric across `scenarios`.
///
/// `policies` is empty for non-learned strategies, holds one network shared
/// by every scenario, or one per scenario.
pub fn evaluate_strategy(
    desc: &StrategyDescriptor,
    ctx: &EvalContext,
    scenarios: &[Scenario],
    policies: &[PolicyNetwork],
) -> Result<StrategyMetrics> {
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig("no scenarios to evaluate".into()));
    }
    if !(policies.len() <= 1 || policies.len() == scenarios.len()) {
        return Err(Error::InvalidConfig("policy count must be 0, 1 or one per scenario".into()));
    }
    let threshold = ctx.evaluator.reward.outage_threshold;
    let metrics = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let policy = match policies.len() {
                0 => None,
                1 => Some(&policies[0]),
                _ => Some(&policies[i]),
            };
            Ok(ScenarioMetrics::of(&evaluate_on(desc, ctx, s, policy)?.outcome, threshold))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategyMetrics::aggregate(&metrics).expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gob::{beams_of, enumerate_subsets, esb_select, Beam, GridOfBeams, SubsetConstraint};
    use crate::mdp::{encode_action, PowerLevels, RewardConfig};
    use crate::netsim::{generate_scenario, SimConfig};
    use crate::radio::sinr;
    use proptest::prelude::*;

    fn grid() -> GridOfBeams {
        GridOfBeams::new(vec![-15.0, -45.0, -60.0], vec![0.0, 45.0, 90.0, 135.0, 180.0]).unwrap()
    }

    fn context() -> EvalContext {
        let c = SubsetConstraint::new(1, 3);
        let power = PowerLevels::default();
        let esb = esb_select(&grid(), c).unwrap();
        EvalContext {
            evaluator: Evaluator { sim: SimConfig::default(), power: power.clone(), reward: RewardConfig::default() },
            space: ActionSpace { family: enumerate_subsets(&grid(), c).unwrap(), power: power.clone() },
            cold_start: Decision::new(esb, power.zero_delta_index().unwrap(), None),
            terminal_rounds: true,
            eval_rounds: 3,
            seed: 0,
        }
    }

    fn esb3() -> BeamSubset {
        esb_select(&grid(), SubsetConstraint::new(1, 3)).unwrap()
    }

    #[test]
    fn reduced_space_sizes() {
        let ctx = context();
        let zero = ctx.space.power.zero_delta_index().unwrap();
        let size = |d: StrategyDescriptor| restrict_action_space(&d, &ctx.space).unwrap().len();
        assert_eq!(size(StrategyDescriptor::full()), 150);
        assert_eq!(size(StrategyDescriptor::power_only(esb3())), 5);
        assert_eq!(size(StrategyDescriptor::beam_only(zero)), 30);
        assert_eq!(size(StrategyDescriptor::esb_fixed(esb3(), zero)), 1);

        let esb = restrict_action_space(&StrategyDescriptor::esb_fixed(esb3(), zero), &ctx.space).unwrap();
        let only = esb.get(0).unwrap();
        assert_eq!(only.subset.theta, vec![-45.0]);
        assert_eq!(only.subset.phi, vec![0.0, 90.0, 180.0]);
        assert_eq!(ctx.space.power.tx_power_dbm(only.power_index), 35.0);
        let a = only.action.unwrap();
        assert_eq!(ctx.space.resolve(a).unwrap().0, only.subset);

        let full_grid = StrategyDescriptor::esb_fixed(grid().full_subset(), zero);
        let d = restrict_action_space(&full_grid, &ctx.space).unwrap();
        assert_eq!(d.get(0).unwrap().subset.k_beams(), 15);
        assert!(d.get(0).unwrap().action.is_none());
    }

    #[test]
    fn embeddings_respect_frozen_components() {
        let ctx = context();
        let zero = ctx.space.power.zero_delta_index().unwrap();
        for desc in [
            StrategyDescriptor::power_only(esb3()),
            StrategyDescriptor::beam_only(zero),
            StrategyDescriptor::full(),
        ] {
            let space = restrict_action_space(&desc, &ctx.space).unwrap();
            for d in space.decisions() {
                let a = d.action.unwrap();
                encode_action(a, ctx.space.dims()).unwrap();
                let (subset, _) = ctx.space.resolve(a).unwrap();
                assert_eq!(subset, d.subset);
                assert_eq!(a.n, d.power_index);
                if let Some(s) = &desc.frozen_subset {
                    assert_eq!(&d.subset, s);
                }
                if let Some(n) = desc.frozen_delta {
                    assert_eq!(d.power_index, n);
                }
            }
        }
    }

    #[test]
    fn malformed_descriptors_are_rejected() {
        let ctx = context();
        let bad = StrategyDescriptor { kind: StrategyKind::A2cPowerOnly, frozen_subset: None, frozen_delta: None };
        assert!(restrict_action_space(&bad, &ctx.space).is_err());
        assert!(restrict_action_space(&StrategyDescriptor::beam_only(9), &ctx.space).is_err());
        let not_member = BeamSubset { theta: vec![-45.0], phi: vec![0.0, 45.0, 90.0, 135.0] };
        assert!(restrict_action_space(&StrategyDescriptor::power_only(not_member), &ctx.space).is_err());
    }

    #[test]
    fn oracle_on_single_action_space_returns_it() {
        let ctx = context();
        let space = restrict_action_space(&StrategyDescriptor::esb_fixed(esb3(), 3), &ctx.space).unwrap();
        let links = generate_scenario(&ctx.evaluator.sim, 5, 0).unwrap().links(&ctx.evaluator.sim).unwrap();
        assert_eq!(oracle_best_action(&links, &space, &ctx.evaluator).unwrap().index, 0);
    }

    #[test]
    fn oracle_finds_the_lobe_beam_at_minimum_power() {
        let ctx = context();
        let sim = ctx.evaluator.sim;
        let target = Beam { theta_deg: -45.0, phi_deg: 90.0 };
        let (gx, _) = sim.gnb_position();
        let drop = sim.link.gnb_height_m - sim.link.ue_height_m;
        // UEs on the boresight of the target beam, shadowed until the margin at P_MIN is 2 dB
        let mut scenario = Scenario {
            ue_positions: (0..5).map(|i| [gx - 1.0 + 0.5 * i as f64, drop, sim.link.ue_height_m]).collect(),
            los_flags: vec![true; 5],
            shadow_draws_db: vec![0.0; 5],
            seed: 0,
        };
        let p_min = ctx.space.power.p_min_dbm();
        let links = scenario.links(&sim).unwrap();
        for (i, link) in links.iter().enumerate() {
            let s = sinr(&sim.link, &sim.antenna, p_min, target, link.direction, link.loss_db);
            scenario.shadow_draws_db[i] = s - 2.0;
        }
        let links = scenario.links(&sim).unwrap();
        let full = restrict_action_space(&StrategyDescriptor::full(), &ctx.space).unwrap();
        let best = oracle_best_action(&links, &full, &ctx.evaluator).unwrap();
        assert!(beams_of(&best.decision.subset).contains(&target));
        assert_eq!(best.decision.power_index, 1);
        assert_eq!(best.outcome.reward.outage, 0.0);

        let exhaustive = full
            .decisions()
            .iter()
            .map(|d| ctx.evaluator.evaluate(&links, d).unwrap().reward.reward)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.outcome.reward.reward, exhaustive);
    }

    #[test]
    fn esb_fixed_is_deterministic_and_full_grid_carries_at_least_as_much() {
        let ctx = context();
        let zero = ctx.space.power.zero_delta_index().unwrap();
        let scenarios: Vec<Scenario> =
            (0..30).map(|s| generate_scenario(&ctx.evaluator.sim, 10, s).unwrap()).collect();
        let esb = StrategyDescriptor::esb_fixed(esb3(), zero);
        let esb15 = StrategyDescriptor::esb_fixed(grid().full_subset(), zero);
        for s in &scenarios {
            let a = evaluate_on(&esb, &ctx, s, None).unwrap();
            assert_eq!(a, evaluate_on(&esb, &ctx, s, None).unwrap());
            let b = evaluate_on(&esb15, &ctx, s, None).unwrap();
            assert!(b.outcome.round.gnb_throughput_bps >= a.outcome.round.gnb_throughput_bps);
        }
        let m = evaluate_strategy(&esb, &ctx, &scenarios[..1], &[]).unwrap();
        assert_eq!(m.ee_ratio.ci95, 0.0);
    }

    #[test]
    fn learned_strategies_need_a_policy() {
        let ctx = context();
        let s = generate_scenario(&ctx.evaluator.sim, 5, 0).unwrap();
        assert!(evaluate_on(&StrategyDescriptor::full(), &ctx, &s, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn oracle_dominates_every_strategy(seed in 0u64..10_000, n_ue in 1usize..20) {
            let ctx = context();
            let s = generate_scenario(&ctx.evaluator.sim, n_ue, seed).unwrap();
            let best = evaluate_on(&StrategyDescriptor::oracle(), &ctx, &s, None).unwrap();
            let zero = ctx.space.power.zero_delta_index().unwrap();
            let full = restrict_action_space(&StrategyDescriptor::full(), &ctx.space).unwrap();
            let links = s.links(&ctx.evaluator.sim).unwrap();
            for d in full.decisions() {
                prop_assert!(best.outcome.reward.reward >= ctx.evaluator.evaluate(&links, d).unwrap().reward.reward);
            }
            for desc in [StrategyDescriptor::esb_fixed(esb3(), zero), StrategyDescriptor::random()] {
                prop_assert!(best.outcome.reward.reward >= evaluate_on(&desc, &ctx, &s, None).unwrap().outcome.reward.reward);
            }
        }
    }
}
