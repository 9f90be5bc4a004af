//! Actor and critic networks plus categorical helpers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activations, Mlp};
use crate::error::{Error, Result};
use crate::mdp::StateVector;

/// Output-layer gain for the actor; keeps the initial policy close to uniform.
pub const POLICY_OUTPUT_GAIN: f64 = 0.01;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Inverse-CDF draw; one uniform variate per call.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_input(net: &Mlp, input: &[f64]) -> Result<()> {
    if input.len() != net.input_dim() {
        return Err(Error::Domain(format!(
            "state has {} entries, network expects {}",
            input.len(),
            net.input_dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork(pub Mlp);

impl PolicyNetwork {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_width: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = [input_dim, hidden_width, hidden_width, n_actions];
        Ok(Self(Mlp::new(&sizes, POLICY_OUTPUT_GAIN, rng)?))
    }

    pub fn n_actions(&self) -> usize {
        self.0.output_dim()
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_input(&self.0, features)?;
        Ok(self.0.forward(features))
    }

    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(features)?))
    }

    /// Action distribution for a quantized state (levels scaled by 1/10).
    pub fn distribution(&self, state: &StateVector) -> Result<Vec<f64>> {
        self.probabilities(&state.features())
    }

    pub(crate) fn forward_cached(&self, features: &[f64]) -> Result<Activations> {
        check_input(&self.0, features)?;
        Ok(self.0.forward_cached(features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNetwork(pub Mlp);

impl ValueNetwork {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_width: usize, rng: &mut R) -> Result<Self> {
        Ok(Self(Mlp::new(&[input_dim, hidden_width, hidden_width, 1], 1.0, rng)?))
    }

    pub fn value(&self, features: &[f64]) -> Result<f64> {
        check_input(&self.0, features)?;
        Ok(self.0.forward(features)[0])
    }

    pub(crate) fn forward_cached(&self, features: &[f64]) -> Result<Activations> {
        check_input(&self.0, features)?;
        Ok(self.0.forward_cached(features))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_policy_is_near_uniform() {
        let a = 150.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = PolicyNetwork::new(5, 64, 150, &mut rng).unwrap();
            for levels in [[0u8; 5], [10; 5], [3, 7, 0, 10, 5]] {
                let probs = net.distribution(&StateVector::new(levels.to_vec()).unwrap()).unwrap();
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                for p in probs {
                    assert!(p >= 0.5 / a && p <= 2.0 / a, "seed {seed}: p = {p}");
                }
            }
        }
    }

    #[test]
    fn wrong_state_width_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = PolicyNetwork::new(5, 8, 4, &mut rng).unwrap();
        assert!(net.probabilities(&[0.0; 4]).is_err());
        let critic = ValueNetwork::new(5, 8, &mut rng).unwrap();
        assert!(critic.value(&[0.0; 6]).is_err());
    }

    #[test]
    fn one_hot_distribution_always_samples_its_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut probs = vec![0.0; 10];
        probs[6] = 1.0;
        assert!((0..1000).all(|_| sample_action(&probs, &mut rng) == 6));
    }

    #[test]
    fn uniform_sampling_passes_chi_square() {
        let k = 150;
        let n = 100_000;
        let probs = vec![1.0 / k as f64; k];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = vec![0usize; k];
        for _ in 0..n {
            counts[sample_action(&probs, &mut rng)] += 1;
        }
        let expected = n as f64 / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let dof = (k - 1) as f64;
        assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 = {chi2}");
        let sigma = (n as f64 * (1.0 / k as f64) * (1.0 - 1.0 / k as f64)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 4.5 * sigma);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let probs = softmax(&[0.1, 0.5, -0.3, 1.2]);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_action(&probs, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.1, 0.7, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..200)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let h = entropy(&p);
            prop_assert!(h >= 0.0 && h <= (logits.len() as f64).ln() + 1e-9);
            let lp = log_softmax(&logits);
            for (a, b) in p.iter().zip(&lp) {
                prop_assert!((a.ln().max(-700.0) - b.max(-700.0)).abs() < 1e-9);
            }
        }

        #[test]
        fn identical_states_give_identical_distributions(seed in any::<u64>(), levels in prop::collection::vec(0u8..=10, 5)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = PolicyNetwork::new(5, 16, 150, &mut rng).unwrap();
            let s = StateVector::new(levels).unwrap();
            let p1 = net.distribution(&s).unwrap();
            prop_assert_eq!(p1.clone(), net.distribution(&s.clone()).unwrap());
            prop_assert!(p1.iter().all(|p| p.is_finite()));
        }
    }
}
