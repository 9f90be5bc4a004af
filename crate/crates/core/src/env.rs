//! The simulator wrapped as a learning environment and a control-loop adapter.

use serde::{Deserialize, Serialize};

use crate::a2c::{Environment, Transition};
use crate::baselines::{Decision, RestrictedSpace};
use crate::error::{Error, Result};
use crate::mdp::{reward, PowerLevels, RewardBreakdown, RewardConfig, StateVector};
use crate::netsim::{run_round_with_links, RoundResult, Scenario, SimConfig, UeLink};

/// Everything needed to score one decision on one set of links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluator {
    pub sim: SimConfig,
    pub power: PowerLevels,
    pub reward: RewardConfig,
}

impl Evaluator {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.power.validate()?;
        self.reward.validate()
    }

    pub fn evaluate(&self, links: &[UeLink], decision: &Decision) -> Result<Outcome> {
        let tx_dbm = self.power.tx_power_dbm(decision.power_index);
        let round = run_round_with_links(links, &decision.subset, tx_dbm, &self.sim, self.reward.outage_threshold)?;
        let reward = reward(&round, &self.power, &self.sim.traffic, self.reward)?;
        Ok(Outcome { round, reward })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub round: RoundResult,
    pub reward: RewardBreakdown,
}

/// Observe-metrics / apply-policy pair through which an external controller drives the network.
pub trait ControlLoop {
    fn observe(&self) -> StateVector;
    fn apply(&mut self, decision: &Decision) -> Result<Outcome>;
}

/// One frozen scenario, stepped one round per action.
///
/// The next observation is the quantized SINR produced by the action just
/// taken. The first observation comes from a round under `cold_start`.
#[derive(Debug, Clone)]
pub struct BeamEnv {
    evaluator: Evaluator,
    space: RestrictedSpace,
    links: Vec<UeLink>,
    cold_start: Decision,
    terminal_rounds: bool,
    state: StateVector,
    last: Option<(usize, Outcome)>,
}

impl BeamEnv {
    pub fn new(
        evaluator: Evaluator,
        space: RestrictedSpace,
        scenario: &Scenario,
        cold_start: Decision,
        terminal_rounds: bool,
    ) -> Result<Self> {
        if space.is_empty() {
            return Err(Error::InvalidConfig("empty action space".into()));
        }
        if scenario.n_ue() == 0 {
            return Err(Error::Domain("scenario has no UEs".into()));
        }
        let links = scenario.links(&evaluator.sim)?;
        let state = evaluator.evaluate(&links, &cold_start)?.round.state();
        Ok(Self {
            evaluator,
            space,
            links,
            cold_start,
            terminal_rounds,
            state,
            last: None,
        })
    }

    pub fn space(&self) -> &RestrictedSpace {
        &self.space
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn links(&self) -> &[UeLink] {
        &self.links
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Index and outcome of the most recent step.
    pub fn last(&self) -> Option<&(usize, Outcome)> {
        self.last.as_ref()
    }

    pub fn step_decision(&mut self, index: usize) -> Result<&Outcome> {
        let decision = self
            .space
            .get(index)
            .ok_or_else(|| Error::Domain(format!("action {index} outside a space of {}", self.space.len())))?
            .clone();
        let outcome = self.evaluator.evaluate(&self.links, &decision)?;
        self.state = outcome.round.state();
        self.last = Some((index, outcome));
        Ok(&self.last.as_ref().unwrap().1)
    }
}

impl Environment for BeamEnv {
    fn observation_dim(&self) -> usize {
        self.links.len()
    }

    fn action_count(&self) -> usize {
        self.space.len()
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.state = self.evaluator.evaluate(&self.links, &self.cold_start)?.round.state();
        self.last = None;
        Ok(self.state.features())
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let reward = self.step_decision(action)?.reward.reward;
        Ok(Transition {
            observation: self.state.features(),
            reward,
            terminal: self.terminal_rounds,
        })
    }
}

impl ControlLoop for BeamEnv {
    fn observe(&self) -> StateVector {
        self.state.clone()
    }

    fn apply(&mut self, decision: &Decision) -> Result<Outcome> {
        let outcome = self.evaluator.evaluate(&self.links, decision)?;
        self.state = outcome.round.state();
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{restrict_action_space, StrategyDescriptor};
    use crate::gob::{enumerate_subsets, esb_select, GridOfBeams, SubsetConstraint};
    use crate::mdp::ActionSpace;
    use crate::netsim::generate_scenario;

    fn setup() -> (Evaluator, ActionSpace, Decision) {
        let grid = GridOfBeams::new(vec![-15.0, -45.0, -60.0], vec![0.0, 45.0, 90.0, 135.0, 180.0]).unwrap();
        let c = SubsetConstraint::new(1, 3);
        let family = enumerate_subsets(&grid, c).unwrap();
        let power = PowerLevels::default();
        let cold = Decision::new(esb_select(&grid, c).unwrap(), power.zero_delta_index().unwrap(), None);
        let eval = Evaluator { sim: SimConfig::default(), power: power.clone(), reward: RewardConfig::default() };
        (eval, ActionSpace { family, power }, cold)
    }

    #[test]
    fn step_observation_is_the_state_of_the_applied_action() {
        let (eval, space, cold) = setup();
        let restricted = restrict_action_space(&StrategyDescriptor::full(), &space).unwrap();
        let scenario = generate_scenario(&eval.sim, 5, 4).unwrap();
        let mut env = BeamEnv::new(eval.clone(), restricted.clone(), &scenario, cold.clone(), true).unwrap();
        assert_eq!(env.observation_dim(), 5);
        assert_eq!(env.action_count(), 150);

        let first = env.reset().unwrap();
        let links = scenario.links(&eval.sim).unwrap();
        assert_eq!(first, eval.evaluate(&links, &cold).unwrap().round.state().features());

        let t = env.step(42).unwrap();
        let direct = eval.evaluate(&links, restricted.get(42).unwrap()).unwrap();
        assert_eq!(t.observation, direct.round.state().features());
        assert_eq!(t.reward, direct.reward.reward);
        assert!(t.terminal);
        assert!(env.step(150).is_err());
    }

    #[test]
    fn control_loop_matches_environment_steps() {
        let (eval, space, cold) = setup();
        let restricted = restrict_action_space(&StrategyDescriptor::full(), &space).unwrap();
        let scenario = generate_scenario(&eval.sim, 8, 1).unwrap();
        let mut a = BeamEnv::new(eval.clone(), restricted.clone(), &scenario, cold.clone(), false).unwrap();
        let mut b = a.clone();
        let via_env = a.step(7).unwrap();
        let via_loop = b.apply(restricted.get(7).unwrap()).unwrap();
        assert_eq!(via_env.reward, via_loop.reward.reward);
        assert_eq!(a.observe(), b.observe());
    }
}
