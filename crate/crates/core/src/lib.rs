//! Grid-of-Beams mmWave simulator with advantage actor-critic control of the
//! active beam subset and transmit power.

// `!(x > 0.0)` is how validation rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod a2c;
pub mod baselines;
pub mod env;
pub mod error;
pub mod gob;
pub mod harness;
pub mod mdp;
pub mod netsim;
pub mod radio;
pub mod seeds;
pub mod stats;

pub use baselines::{restrict_action_space, Decision, RestrictedSpace, StrategyDescriptor, StrategyKind};
pub use env::{BeamEnv, ControlLoop, Evaluator, Outcome};
pub use error::{Error, Result};
pub use gob::{enumerate_subsets, esb_select, Beam, BeamSubset, GridOfBeams, SubsetConstraint, SubsetFamily};
pub use mdp::{
    decode_action, encode_action, quantize_sinr, reward, ActionDims, ActionSpace, BeamAction, PowerLevels,
    RewardBreakdown, RewardConfig, StateVector,
};
pub use netsim::{generate_scenario, run_round, RoundResult, Scenario, SimConfig};
pub use radio::{AntennaConfig, LinkBudgetConfig};
