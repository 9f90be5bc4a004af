//! Advantage actor-critic: networks, optimizer and training loop.

mod mlp;
mod optim;
mod policy;
mod trainer;

pub use mlp::{Activations, Mlp};
pub use optim::{clip_global_norm, RmsProp};
pub use policy::{argmax, entropy, log_softmax, sample_action, softmax, PolicyNetwork, ValueNetwork, POLICY_OUTPUT_GAIN};
pub use trainer::{
    advantage, discounted_returns, train, Agent, Checkpoint, Environment, Gradients, LossReport, Sample, Step,
    StepEvent, TrainOutcome, Transition, TrainerConfig, CHECKPOINT_VERSION,
};
