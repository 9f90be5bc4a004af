//! Shared fixtures for the benchmarks.

use beamsel_core::a2c::{Agent, Sample, TrainerConfig};
use beamsel_core::baselines::EvalContext;
use beamsel_core::harness::ExperimentConfig;
use beamsel_core::netsim::{Scenario, UeLink};

pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub ctx: EvalContext,
    pub scenario: Scenario,
    pub links: Vec<UeLink>,
}

/// The shipped configuration with one frozen scenario of `n_ue` users.
pub fn fixture(n_ue: usize) -> Fixture {
    let cfg = ExperimentConfig::shipped();
    let ctx = cfg.eval_context().expect("shipped config is valid");
    let scenario = beamsel_core::generate_scenario(&cfg.sim, n_ue, 42).expect("valid scenario");
    let links = scenario.links(&cfg.sim).expect("valid links");
    Fixture { cfg, ctx, scenario, links }
}

/// A default-sized agent over the full action space and one rollout of samples.
pub fn agent_and_batch(n_ue: usize, n_actions: usize) -> (Agent, Vec<Sample>) {
    let agent = Agent::new(n_ue, n_actions, TrainerConfig::default()).expect("valid trainer");
    let batch = (0..TrainerConfig::default().rollout_length)
        .map(|i| Sample {
            features: (0..n_ue).map(|u| ((i + u) % 11) as f64 / 10.0).collect(),
            action: (i * 37) % n_actions,
            advantage: 0.25 - 0.1 * i as f64,
            target: 0.5,
        })
        .collect();
    (agent, batch)
}
