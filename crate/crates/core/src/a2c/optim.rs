use serde::{Deserialize, Serialize};

/// RMSprop with the denominator `sqrt(v) + eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
    square_avg: Vec<f64>,
}

impl RmsProp {
    pub fn new(n_params: usize, learning_rate: f64, decay: f64, eps: f64) -> Self {
        Self {
            learning_rate,
            decay,
            eps,
            square_avg: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.square_avg.len());
        for ((p, &g), v) in params.iter_mut().zip(grads).zip(&mut self.square_avg) {
            *v = self.decay * *v + (1.0 - self.decay) * g * g;
            *p -= self.learning_rate * g / (v.sqrt() + self.eps);
        }
    }

    pub fn n_params(&self) -> usize {
        self.square_avg.len()
    }
}

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / (norm + 1e-6);
        for g in grads.iter_mut().flat_map(|g| g.iter_mut()) {
            *g *= scale;
        }
    }
    norm
}
