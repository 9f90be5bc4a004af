//! Advantage actor-critic training loop.

use std::ops::ControlFlow;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::optim::{clip_global_norm, RmsProp};
use super::policy::{argmax, entropy, log_softmax, sample_action, softmax, PolicyNetwork, ValueNetwork};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub rollout_length: usize,
    pub episodes: usize,
    pub gradient_clip_norm: f64,
    pub hidden_width: usize,
    pub rng_seed: u64,
    pub normalize_advantage: bool,
    pub rms_decay: f64,
    pub rms_eps: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 7e-4,
            gamma: 0.99,
            entropy_coef: 0.03,
            value_coef: 0.5,
            rollout_length: 5,
            episodes: 3000,
            gradient_clip_norm: 0.5,
            hidden_width: 64,
            rng_seed: 0,
            normalize_advantage: false,
            rms_decay: 0.99,
            rms_eps: 1e-5,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("trainer: {msg}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if self.rollout_length == 0 || self.hidden_width == 0 {
            return bad("rollout_length and hidden_width must be at least 1");
        }
        if !(self.gradient_clip_norm > 0.0) {
            return bad("gradient_clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_eps > 0.0) {
            return bad("rms_decay must lie in [0, 1) and rms_eps be positive");
        }
        Ok(())
    }
}

/// A sequential decision process with a flat discrete action set.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>>;
    fn step(&mut self, action: usize) -> Result<Transition>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// No bootstrapping past this step.
    pub terminal: bool,
}

/// `r + γ·V(s')·(1 − terminal) − V(s)`.
pub fn advantage(reward: f64, value_s: f64, value_next: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * value_next };
    reward + bootstrap - value_s
}

/// Discounted n-step returns, walking back from `bootstrap` and resetting at terminal steps.
pub fn discounted_returns(rewards: &[f64], terminals: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap;
    for i in (0..rewards.len()).rev() {
        if terminals[i] {
            running = 0.0;
        }
        running = rewards[i] + gamma * running;
        out[i] = running;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub action: usize,
    pub advantage: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

impl LossReport {
    pub fn total(&self, value_coef: f64) -> f64 {
        self.actor_loss + value_coef * self.critic_loss
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: TrainerConfig,
    policy: PolicyNetwork,
    value: ValueNetwork,
    policy_opt: RmsProp,
    value_opt: RmsProp,
    rng: ChaCha8Rng,
    steps: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainerConfig,
    pub policy: Mlp,
    pub value: Mlp,
    pub policy_opt: RmsProp,
    pub value_opt: RmsProp,
    pub rng: ChaCha8Rng,
    pub steps: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Agent {
    pub fn new(observation_dim: usize, n_actions: usize, config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let policy = PolicyNetwork::new(observation_dim, config.hidden_width, n_actions, &mut rng)?;
        let value = ValueNetwork::new(observation_dim, config.hidden_width, &mut rng)?;
        let opt = |n| RmsProp::new(n, config.learning_rate, config.rms_decay, config.rms_eps);
        Ok(Self {
            policy_opt: opt(policy.0.params().len()),
            value_opt: opt(value.0.params().len()),
            policy,
            value,
            rng,
            steps: 0,
            config,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ckpt.version)));
        }
        ckpt.config.validate()?;
        let (policy, value) = (
            Mlp::from_parts(ckpt.policy.sizes().to_vec(), ckpt.policy.params().to_vec())?,
            Mlp::from_parts(ckpt.value.sizes().to_vec(), ckpt.value.params().to_vec())?,
        );
        if policy.input_dim() != value.input_dim()
            || value.output_dim() != 1
            || ckpt.policy_opt.n_params() != policy.params().len()
            || ckpt.value_opt.n_params() != value.params().len()
        {
            return Err(Error::Checkpoint("inconsistent network or optimizer shapes".into()));
        }
        Ok(Self {
            config: ckpt.config,
            policy: PolicyNetwork(policy),
            value: ValueNetwork(value),
            policy_opt: ckpt.policy_opt,
            value_opt: ckpt.value_opt,
            rng: ckpt.rng,
            steps: ckpt.steps,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            policy: self.policy.0.clone(),
            value: self.value.0.clone(),
            policy_opt: self.policy_opt.clone(),
            value_opt: self.value_opt.clone(),
            rng: self.rng.clone(),
            steps: self.steps,
        }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn policy(&self) -> &PolicyNetwork {
        &self.policy
    }

    pub fn value_net(&self) -> &ValueNetwork {
        &self.value
    }

    pub fn policy_mut(&mut self) -> &mut PolicyNetwork {
        &mut self.policy
    }

    pub fn value_net_mut(&mut self) -> &mut ValueNetwork {
        &mut self.value
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn act(&mut self, features: &[f64]) -> Result<usize> {
        let probs = self.policy.probabilities(features)?;
        Ok(sample_action(&probs, &mut self.rng))
    }

    pub fn greedy(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.policy.logits(features)?))
    }

    pub fn value(&self, features: &[f64]) -> Result<f64> {
        self.value.value(features)
    }

    /// Losses and unclipped gradients of `actor + value_coef · critic` over `batch`.
    pub fn gradients(&self, batch: &[Sample]) -> Result<(LossReport, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Domain("update batch is empty".into()));
        }
        let n_actions = self.policy.n_actions();
        let inv = 1.0 / batch.len() as f64;
        let c_ent = self.config.entropy_coef;
        let c_val = self.config.value_coef;
        let mut grads = Gradients {
            policy: vec![0.0; self.policy.0.params().len()],
            value: vec![0.0; self.value.0.params().len()],
        };
        let mut report = LossReport {
            actor_loss: 0.0,
            critic_loss: 0.0,
            entropy: 0.0,
            grad_norm: 0.0,
        };
        for s in batch {
            if s.action >= n_actions {
                return Err(Error::Domain(format!("action {} out of range", s.action)));
            }
            let acts = self.policy.forward_cached(&s.features)?;
            let logits = acts.output();
            let probs = softmax(logits);
            let logp = log_softmax(logits);
            let h = entropy(&probs);
            report.actor_loss += (-s.advantage * logp[s.action] - c_ent * h) * inv;
            report.entropy += h * inv;
            let grad_logits: Vec<f64> = (0..n_actions)
                .map(|j| {
                    let indicator = if j == s.action { 1.0 } else { 0.0 };
                    let pg = -s.advantage * (indicator - probs[j]);
                    let ent = if probs[j] > 0.0 { c_ent * probs[j] * (logp[j] + h) } else { 0.0 };
                    (pg + ent) * inv
                })
                .collect();
            self.policy.0.backward(&acts, &grad_logits, &mut grads.policy);

            let vacts = self.value.forward_cached(&s.features)?;
            let err = s.target - vacts.output()[0];
            report.critic_loss += err * err * inv;
            self.value.0.backward(&vacts, &[-2.0 * c_val * err * inv], &mut grads.value);
        }
        Ok((report, grads))
    }

    /// One clipped optimizer step on both networks.
    pub fn update(&mut self, batch: &[Sample]) -> Result<LossReport> {
        let (mut report, mut grads) = self.gradients(batch)?;
        if !(report.actor_loss.is_finite() && report.critic_loss.is_finite()) {
            return Err(Error::NonFiniteLoss {
                episode: self.steps as usize,
                actor_loss: report.actor_loss,
                critic_loss: report.critic_loss,
            });
        }
        report.grad_norm = clip_global_norm(
            &mut [&mut grads.policy, &mut grads.value],
            self.config.gradient_clip_norm,
        );
        self.policy_opt.step(self.policy.0.params_mut(), &grads.policy);
        self.value_opt.step(self.value.0.params_mut(), &grads.value);
        Ok(report)
    }

    /// Builds n-step targets for a rollout and applies one update.
    pub fn learn(&mut self, rollout: &[Step], next_features: &[f64]) -> Result<LossReport> {
        let last_terminal = rollout.last().is_some_and(|s| s.terminal);
        let bootstrap = if last_terminal { 0.0 } else { self.value(next_features)? };
        let rewards: Vec<f64> = rollout.iter().map(|s| s.reward).collect();
        let terminals: Vec<bool> = rollout.iter().map(|s| s.terminal).collect();
        let returns = discounted_returns(&rewards, &terminals, bootstrap, self.config.gamma);
        let mut batch = Vec::with_capacity(rollout.len());
        for (s, ret) in rollout.iter().zip(returns) {
            let v = self.value(&s.features)?;
            batch.push(Sample {
                features: s.features.clone(),
                action: s.action,
                advantage: ret - v,
                target: ret,
            });
        }
        if self.config.normalize_advantage && batch.len() > 1 {
            let n = batch.len() as f64;
            let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
            let var = batch.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt() + 1e-8;
            batch.iter_mut().for_each(|s| s.advantage = (s.advantage - mean) / sd);
        }
        self.update(&batch)
    }
}

/// One interaction recorded into a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// Passed to the observer after each environment step.
pub struct StepEvent<'a, E> {
    pub episode: usize,
    pub action: usize,
    pub transition: &'a Transition,
    pub env: &'a E,
    /// Set when this step closed a rollout.
    pub loss: Option<LossReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub rewards: Vec<f64>,
    pub interrupted: bool,
}

/// Runs `episodes` environment steps, updating every `rollout_length` steps.
/// The observer may return `Break` to stop early; the agent is left in a
/// consistent state for checkpointing.
pub fn train<E, F>(env: &mut E, agent: &mut Agent, episodes: usize, mut observer: F) -> Result<TrainOutcome>
where
    E: Environment,
    F: FnMut(&StepEvent<'_, E>) -> ControlFlow<()>,
{
    if env.observation_dim() != agent.policy.0.input_dim() || env.action_count() != agent.policy.n_actions() {
        return Err(Error::InvalidConfig(
            "environment shape does not match the agent's networks".into(),
        ));
    }
    let rollout_len = agent.config.rollout_length;
    let mut features = env.reset()?;
    let mut rollout: Vec<Step> = Vec::with_capacity(rollout_len);
    let mut rewards = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let action = agent.act(&features)?;
        let transition = env.step(action)?;
        agent.steps += 1;
        rewards.push(transition.reward);
        rollout.push(Step {
            features: std::mem::replace(&mut features, transition.observation.clone()),
            action,
            reward: transition.reward,
            terminal: transition.terminal,
        });
        let loss = if rollout.len() == rollout_len || episode + 1 == episodes {
            let report = agent.learn(&rollout, &features)?;
            rollout.clear();
            Some(report)
        } else {
            None
        };
        let event = StepEvent {
            episode,
            action,
            transition: &transition,
            env,
            loss,
        };
        if observer(&event).is_break() {
            if !rollout.is_empty() {
                agent.learn(&rollout, &features)?;
            }
            return Ok(TrainOutcome {
                rewards,
                interrupted: true,
            });
        }
    }
    Ok(TrainOutcome {
        rewards,
        interrupted: false,
    })
}
